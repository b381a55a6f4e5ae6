use gazestudio_core::attnmap::AttentionMap;
use gazestudio_core::net::{gradients, total_loss, ClassifierParams, Example, FeatureStack, LossConfig};
use gazestudio_core::KlGrade;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const CLASSES: usize = 5;
const CHANNELS: usize = 6;
const GRID: usize = 16;

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let values = (0..CHANNELS * GRID * GRID).map(|_| rng.gen::<f64>()).collect();
            let gaze = (i % 3 != 2).then(|| {
                AttentionMap::from_values(GRID, GRID, (0..GRID * GRID).map(|_| rng.gen::<f64>()).collect()).unwrap()
            });
            Example {
                features: FeatureStack::from_values(CHANNELS, GRID, GRID, values).unwrap(),
                grade: KlGrade::new(rng.gen_range(0..5)).unwrap(),
                gaze,
                boxes: Vec::new(),
                image_width: 128,
                image_height: 128,
            }
        })
        .collect()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let start = std::time::Instant::now();
    let cfg = LossConfig { lambda_ac: 1.0, ..Default::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = random_batch(&mut rng, 4);
        let weights = (0..CLASSES * CHANNELS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = ClassifierParams::from_parts(CLASSES, CHANNELS, weights, rng.gen_range(-2.0..2.0)).unwrap();
        let g = gradients(&batch, &params, &cfg).unwrap();
        let loss_at = |p: &ClassifierParams| total_loss(&batch, p, &cfg).unwrap().total;

        for i in 0..params.weights().len() {
            let (mut plus, mut minus) = (params.clone(), params.clone());
            plus.weights_mut()[i] += H;
            minus.weights_mut()[i] -= H;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * H);
            worst = worst.max(rel_err(g.w[i], numeric));
        }
        let (mut plus, mut minus) = (params.clone(), params.clone());
        plus.set_u(params.u() + H);
        minus.set_u(params.u() - H);
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * H);
        worst = worst.max(rel_err(g.u, numeric));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
