//! Runs every fuzz entry point over the checked-in corpus and over seeded
//! byte mutations of it. Only the absence of panics is checked, mirroring
//! the targets in `fuzz/fuzz_targets`.
//!
//! `cargo test -p objrestore --test fuzz_smoke -- --ignored regenerate_corpus`
//! rewrites the seeds. `FUZZ_SMOKE_MUTANTS` raises the mutant count per seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use objrestore::compose::{LayerTask, ObjectLayer, Project};
use objrestore::estimate::{
    estimate_quality_from_bitstream, estimate_quality_from_tables, Calibration, DegradationParam,
};
use objrestore::io::{decode_image, decode_mask_png, encode_mask_png, encode_png};
use objrestore::kv::KvDocument;
use objrestore::restore::RestoreConstants;
use objrestore::segment::parse_external_response;
use objrestore::segment::rle::{decode_compact, encode_compact, Rle, RleCounts};
use objrestore::{fixtures, jpeg, BinaryMask, ColorSpace, ImageBuffer, Mask};

const TARGETS: [&str; 7] = [
    "jpeg_decode",
    "jpeg_quant_tables",
    "image_decode",
    "kv_parse",
    "external_response",
    "rle_compact",
    "project_zip",
];

const DEFAULT_MUTANTS_PER_SEED: usize = 48;

fn mutants_per_seed() -> usize {
    std::env::var("FUZZ_SMOKE_MUTANTS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MUTANTS_PER_SEED)
}

fn corpus_dir(target: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

fn run(target: &str, data: &[u8]) {
    match target {
        "jpeg_decode" => {
            let _ = jpeg::decode(data);
        }
        "jpeg_quant_tables" => {
            if let Ok(t) = jpeg::read_quant_tables(data) {
                let _ = estimate_quality_from_tables(&t);
            }
            let _ = estimate_quality_from_bitstream(data);
        }
        "image_decode" => {
            let _ = decode_image(data);
            let _ = decode_mask_png(data);
        }
        "kv_parse" => {
            if let Ok(text) = std::str::from_utf8(data) {
                let _ = KvDocument::parse(text);
                let _ = RestoreConstants::parse(text);
                let _ = Calibration::parse(text);
            }
        }
        "external_response" => {
            let _ = parse_external_response(data, 40, 30);
        }
        "rle_compact" => {
            if let Ok(text) = std::str::from_utf8(data) {
                let _ = decode_compact(text);
            }
        }
        "project_zip" => {
            let _ = Project::from_zip(data);
        }
        other => panic!("unknown target {other}"),
    }
}

fn mutate(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = seed.to_vec();
    match rng.random_range(0..4) {
        // Flip a few bytes.
        0 if !out.is_empty() => {
            for _ in 0..rng.random_range(1..8) {
                let i = rng.random_range(0..out.len());
                out[i] = rng.random();
            }
        }
        // Truncate.
        1 => out.truncate(rng.random_range(0..=out.len())),
        // Duplicate a slice in place.
        2 if out.len() > 1 => {
            let a = rng.random_range(0..out.len());
            let b = rng.random_range(a..out.len());
            let chunk = out[a..=b].to_vec();
            let at = rng.random_range(0..=out.len());
            out.splice(at..at, chunk);
        }
        _ => {
            out = (0..rng.random_range(0..256))
                .map(|_| rng.random())
                .collect()
        }
    }
    out
}

#[test]
fn corpus_seeds_and_mutants_do_not_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mutants = mutants_per_seed();
    for target in TARGETS {
        let dir = corpus_dir(target);
        let mut seeds: Vec<_> = fs::read_dir(&dir)
            .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
            .map(|e| e.unwrap().path())
            .collect();
        seeds.sort();
        assert!(!seeds.is_empty(), "{target} has no seeds");
        for path in seeds {
            let seed = fs::read(&path).unwrap();
            run(target, &seed);
            for _ in 0..mutants {
                run(target, &mutate(&seed, &mut rng));
            }
        }
    }
}

#[test]
fn valid_seeds_parse() {
    let read = |target: &str, name: &str| fs::read(corpus_dir(target).join(name)).unwrap();
    assert!(jpeg::decode(&read("jpeg_decode", "rgb_q50.jpg")).is_ok());
    assert!(jpeg::decode(&read("jpeg_decode", "gray_q75.jpg")).is_ok());
    assert!(jpeg::read_quant_tables(&read("jpeg_quant_tables", "rgb_q20.jpg")).is_ok());
    assert!(decode_image(&read("image_decode", "rgb.png")).is_ok());
    assert!(decode_mask_png(&read("image_decode", "mask.png")).is_ok());
    let text = String::from_utf8(read("kv_parse", "restore_constants.txt")).unwrap();
    assert!(RestoreConstants::parse(&text).is_ok());
    let text = String::from_utf8(read("kv_parse", "calibration.txt")).unwrap();
    assert!(Calibration::parse(&text).is_ok());
    for name in ["png.json", "rle_list.json", "rle_compact.json"] {
        assert!(
            parse_external_response(&read("external_response", name), 40, 30).is_ok(),
            "{name}"
        );
    }
    let text = String::from_utf8(read("rle_compact", "left_half.txt")).unwrap();
    assert!(decode_compact(&text).is_ok());
    assert!(Project::from_zip(&read("project_zip", "one_layer.zip")).is_ok());
}

fn left_half() -> BinaryMask {
    BinaryMask::from_fn(40, 30, |x, _| x < 20)
}

#[test]
#[ignore]
fn regenerate_corpus() {
    let write = |target: &str, name: &str, bytes: &[u8]| {
        let dir = corpus_dir(target);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(name), bytes).unwrap();
    };
    let rgb = fixtures::natural(1, 24, 17).quantize_u8();
    let gray = ImageBuffer::new(
        16,
        16,
        1,
        ColorSpace::Srgb,
        fixtures::natural(2, 16, 16).plane(1).to_vec(),
    )
    .unwrap()
    .quantize_u8();
    for (name, img, q) in [("rgb_q50.jpg", &rgb, 50), ("gray_q75.jpg", &gray, 75)] {
        write("jpeg_decode", name, &jpeg::encode(img, q).unwrap());
    }
    write(
        "jpeg_quant_tables",
        "rgb_q20.jpg",
        &jpeg::encode(&rgb, 20).unwrap(),
    );
    write(
        "jpeg_quant_tables",
        "rgb_q95.jpg",
        &jpeg::encode(&rgb, 95).unwrap(),
    );
    write("image_decode", "rgb.png", &encode_png(&rgb).unwrap());
    write(
        "image_decode",
        "rgb_q60.jpg",
        &jpeg::encode(&rgb, 60).unwrap(),
    );
    let alpha = Mask::from_fn(40, 30, |x, _| if x < 20 { 1.0 } else { 0.0 }).unwrap();
    write(
        "image_decode",
        "mask.png",
        &encode_mask_png(&alpha).unwrap(),
    );

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in ["restore_constants.txt", "calibration.txt"] {
        write("kv_parse", name, &fs::read(data.join(name)).unwrap());
    }

    use base64::Engine;
    let png = base64::engine::general_purpose::STANDARD.encode(encode_mask_png(&alpha).unwrap());
    let rle = Rle::encode(&left_half());
    let RleCounts::List(counts) = rle.counts.clone() else {
        unreachable!()
    };
    let compact = encode_compact(&counts);
    let bodies = [
        ("png.json", json!({ "mask_png": png, "score": 0.9 })),
        ("rle_list.json", json!({ "mask_rle": rle, "score": 0.7 })),
        (
            "rle_compact.json",
            json!({ "mask_rle": { "counts": compact, "size": [30, 40] }, "score": 0.6 }),
        ),
    ];
    for (name, body) in bodies {
        write("external_response", name, body.to_string().as_bytes());
    }
    write("rle_compact", "left_half.txt", compact.as_bytes());

    let mut project = Project::new(rgb.clone(), None).unwrap();
    let mut layer = ObjectLayer::new(
        "a",
        Mask::from_fn(24, 17, |x, _| if x < 12 { 1.0 } else { 0.0 }).unwrap(),
    )
    .unwrap();
    layer.task = LayerTask::Denoise;
    layer.predicted = Some(DegradationParam::noise(10.0, 0.8).unwrap());
    project.add_layer(layer).unwrap();
    write("project_zip", "one_layer.zip", &project.to_zip().unwrap());
}
