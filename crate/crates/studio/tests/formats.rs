use std::path::Path;

use gazestudio::dataset::{load_dataset, write_corpus, MANIFEST_FILE};
use gazestudio::gamap::{read_gamap, read_image, write_gamap, write_image};
use gazestudio::manifest::{load_manifest, save_manifest, ManifestError};
use gazestudio::track::{parse_track, serialize_track, ParseOptions};
use gazestudio_core::attnmap::{decode_gamap, encode_gamap};
use gazestudio_core::synth::{generate, SynthConfig};
use gazestudio_core::{AttentionMap, GazeSample, GazeTrack, KlGrade, TrackMeta};
use proptest::prelude::*;

fn small() -> SynthConfig {
    SynthConfig { n_train: 6, n_val: 2, n_test: 2, samples_per_track: 200, seed: 9, ..Default::default() }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn same_seed_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_corpus(&generate(&small()), a.path()).unwrap();
    write_corpus(&generate(&small()), b.path()).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.len() > 30);
    assert_eq!(ta, tb);
}

#[test]
fn corpus_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&small());
    write_corpus(&corpus, dir.path()).unwrap();
    let data = load_dataset(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(data.items.len(), corpus.items.len());
    for (loaded, item) in data.items.iter().zip(&corpus.items) {
        assert_eq!(loaded.entry.image_id, item.id);
        assert_eq!(loaded.entry.grade, item.grade);
        assert_eq!(loaded.entry.boxes, item.boxes);
        assert_eq!(loaded.image, item.image);
        assert_eq!(loaded.tracks, vec![item.track.clone()]);
        assert_eq!(loaded.labels.as_ref(), Some(&item.labels));
        assert_eq!(loaded.entry.grade.value() == 0, loaded.entry.boxes.is_empty());
    }
}

#[test]
fn manifest_save_load_identity() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&generate(&small()), dir.path()).unwrap();
    let copy = dir.path().join("copy.json");
    save_manifest(&manifest, &copy).unwrap();
    assert_eq!(load_manifest(&copy).unwrap().manifest, manifest);
}

#[test]
fn missing_image_names_entry() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&generate(&small()), dir.path()).unwrap();
    let victim = &manifest.entries[3];
    std::fs::remove_file(dir.path().join(&victim.image_path)).unwrap();
    match load_manifest(&dir.path().join(MANIFEST_FILE)) {
        Err(ManifestError::MissingFile { entry, path }) => {
            assert_eq!(entry, victim.image_id);
            assert!(path.ends_with(&victim.image_path));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_meta_names_entry() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_corpus(&generate(&small()), dir.path()).unwrap();
    let victim = &manifest.entries[1];
    std::fs::remove_file(dir.path().join("tracks").join(format!("{}.meta.json", victim.image_id))).unwrap();
    assert!(matches!(load_manifest(&dir.path().join(MANIFEST_FILE)), Err(ManifestError::MissingFile { entry, .. }) if entry == victim.image_id));
}

#[test]
fn bad_grade_in_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, br#"{"entries":[{"image_id":"x","image_path":"x.png","grade":7}]}"#).unwrap();
    assert!(matches!(load_manifest(&path), Err(ManifestError::BadGrade { grade: 7, .. })));
}

#[test]
fn gamap_file_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (0..12).map(|i| (i as f32 * 0.37).fract() as f64).collect();
    let m = AttentionMap::from_values(4, 3, values).unwrap();
    let p = dir.path().join("m.gamap");
    write_gamap(&p, &m).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..6], b"GAMAP1");
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 4);
    assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 14 + 4 * 12);
    assert_eq!(read_gamap(&p).unwrap(), m);
}

#[test]
fn image_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let item = &generate(&small()).items[1];
    let p = dir.path().join("i.png");
    write_image(&p, &item.image).unwrap();
    assert_eq!(read_image(&p).unwrap(), item.image);
}

fn track_strategy() -> impl Strategy<Value = GazeTrack> {
    (1usize..60, 1u32..2000, 1u32..2000).prop_flat_map(|(n, w, h)| {
        (
            prop::collection::vec((0.001f64..50.0, -100.0f64..2100.0, -100.0f64..2100.0), n),
            Just(w),
            Just(h),
            0u8..5,
        )
            .prop_map(|(rows, w, h, g)| {
                let mut t = 0.0;
                let samples = rows
                    .into_iter()
                    .map(|(dt, x, y)| {
                        t += dt;
                        GazeSample::new(t, x, y)
                    })
                    .collect();
                GazeTrack::new(TrackMeta::new("img", "reader", KlGrade::new(g).unwrap(), w, h), samples).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn jsonl_round_trip(track in track_strategy()) {
        let back = parse_track(&serialize_track(&track), track.meta().clone(), ParseOptions { sort: false }).unwrap();
        prop_assert_eq!(back, track);
    }

    #[test]
    fn gamap_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let values: Vec<f64> = (0..w * h).map(|i| ((seed.wrapping_mul(i as u64 + 1) >> 40) as f32 / 16777216.0) as f64).collect();
        let m = AttentionMap::from_values(w, h, values).unwrap();
        let bytes = encode_gamap(&m);
        let back = decode_gamap(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode_gamap(&back), bytes);
    }
}
