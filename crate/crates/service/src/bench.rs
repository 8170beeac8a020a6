//! Acceptance harness: runs every primary criterion on synthetic fixtures
//! and reports one row per measured case.
//!
//! Measurements that decide a verdict (PSNR, IoU, total variation,
//! blockiness, spread of a noise field) go through an [`Oracle`], so a test
//! can supply implementations independent of the library under test.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use objrestore::compose::{EnhanceSettings, ExportFormat, LayerTask, ObjectLayer, Project};
use objrestore::degrade::{apply_awgn, apply_blur, BLUR_KERNEL_SIZE};
use objrestore::estimate::{
    estimate_blur_sigma, estimate_noise_sigma, estimate_quality_from_pixels,
    estimate_quality_from_tables, Calibration, DegradationParam,
};
use objrestore::io::encode_png;
use objrestore::restore::{deblock_dct_stats, denoise_tv, restore_full, Task};
use objrestore::segment::{
    segment_builtin, segment_external, ClickLabel, ClickPoint, ClickPrompt, ExternalSegmenter,
};
use objrestore::{
    fixtures, gaussian_kernel, jpeg, metrics, BinaryMask, ColorSpace, Error, ImageBuffer, Mask,
};

use crate::cli::{self, Command, FormatArg};
use crate::config::Config;
use crate::http::{router, AppState};
use crate::session::SessionStore;

/// Verdict-deciding measurements.
pub trait Oracle: Sync {
    fn psnr(&self, a: &ImageBuffer, b: &ImageBuffer) -> f64;
    fn iou(&self, a: &BinaryMask, b: &BinaryMask) -> f64;
    fn total_variation(&self, img: &ImageBuffer) -> f64;
    fn blockiness(&self, img: &ImageBuffer) -> f64;
    fn std_dev(&self, xs: &[f64]) -> f64;
}

/// The library's own metrics.
pub struct LibraryOracle;

impl Oracle for LibraryOracle {
    fn psnr(&self, a: &ImageBuffer, b: &ImageBuffer) -> f64 {
        metrics::psnr(a, b).unwrap_or(f64::NAN)
    }
    fn iou(&self, a: &BinaryMask, b: &BinaryMask) -> f64 {
        a.iou(b)
    }
    fn total_variation(&self, img: &ImageBuffer) -> f64 {
        metrics::total_variation(img)
    }
    fn blockiness(&self, img: &ImageBuffer) -> f64 {
        metrics::blockiness(img)
    }
    fn std_dev(&self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
    }
}

/// One measured case.
#[derive(Clone, Debug)]
pub struct Check {
    pub case: String,
    pub metric: &'static str,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: &'static str,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl CriterionReport {
    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) && self.within_budget()
    }

    pub fn summary_line(&self) -> String {
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let budget = match self.budget {
            Some(b) => format!(", budget {:.0}s", b.as_secs_f64()),
            None => String::new(),
        };
        let mut line = format!(
            "{} {}: {} ({} checks, {} failed, {:.2}s{budget})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len(),
            failed,
            self.elapsed.as_secs_f64(),
        );
        for c in self.checks.iter().filter(|c| !c.pass).take(5) {
            line += &format!(
                "\n    failed: {} {} = {} (want {})",
                c.case, c.metric, c.value, c.bound
            );
        }
        if !self.within_budget() {
            line += "\n    failed: runtime budget exceeded";
        }
        line
    }
}

struct Recorder {
    checks: Vec<Check>,
}

impl Recorder {
    fn new() -> Self {
        Recorder { checks: Vec::new() }
    }

    fn push(
        &mut self,
        case: impl Into<String>,
        metric: &'static str,
        value: f64,
        bound: impl Into<String>,
        pass: bool,
    ) {
        self.checks.push(Check {
            case: case.into(),
            metric,
            value,
            bound: bound.into(),
            pass,
        });
    }

    fn at_least(&mut self, case: impl Into<String>, metric: &'static str, value: f64, min: f64) {
        self.push(case, metric, value, format!(">= {min}"), value >= min);
    }

    fn within(
        &mut self,
        case: impl Into<String>,
        metric: &'static str,
        value: f64,
        target: f64,
        tol: f64,
    ) {
        let pass = (value - target).abs() <= tol;
        self.push(case, metric, value, format!("{target} +- {tol}"), pass);
    }

    fn flag(&mut self, case: impl Into<String>, metric: &'static str, ok: bool) {
        self.push(case, metric, if ok { 1.0 } else { 0.0 }, "1", ok);
    }

    /// Records a failed check for an operation that returned an error.
    fn error(&mut self, case: impl Into<String>, metric: &'static str, e: impl std::fmt::Display) {
        self.push(
            format!("{} [error: {e}]", case.into()),
            metric,
            f64::NAN,
            "no error",
            false,
        );
    }
}

type Criterion = fn(&dyn Oracle, &mut Recorder);

/// `(id, title, budget, body)` of every primary criterion.
const CRITERIA: [(&str, &str, Option<u64>, Criterion); 7] = [
    (
        "synthesis",
        "degradation synthesis conformance",
        Some(10),
        synthesis,
    ),
    ("estimators", "estimator accuracy", Some(60), estimators),
    ("restoration", "restoration gates", None, restoration),
    (
        "per-object",
        "per-object strength beats best global strength",
        Some(120),
        per_object,
    ),
    (
        "monotone",
        "monotone control and strength-0 identity",
        None,
        monotone,
    ),
    (
        "pipeline",
        "pipeline identities and CLI/HTTP parity",
        None,
        pipeline,
    ),
    (
        "segmentation",
        "segmentation fixtures and external client contract",
        None,
        segmentation,
    ),
];

/// Ids of every primary criterion, in report order.
pub fn criterion_ids() -> impl Iterator<Item = &'static str> {
    CRITERIA.iter().map(|c| c.0)
}

pub fn run_criterion(id: &str, oracle: &dyn Oracle) -> Option<CriterionReport> {
    let &(id, title, budget, body) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let mut rec = Recorder::new();
    body(oracle, &mut rec);
    Some(CriterionReport {
        id,
        title,
        checks: rec.checks,
        elapsed: start.elapsed(),
        budget: budget.map(Duration::from_secs),
    })
}

pub fn run_selected(filter: Option<&str>, oracle: &dyn Oracle) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter(|c| filter.is_none_or(|f| c.0.contains(f)))
        .filter_map(|c| run_criterion(c.0, oracle))
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(reports: &[CriterionReport]) -> String {
    let mut out = String::from("criterion,case,metric,value,bound,pass\n");
    for r in reports {
        for c in &r.checks {
            out += &format!(
                "{},{},{},{},{},{}\n",
                r.id,
                csv_field(&c.case),
                c.metric,
                c.value,
                csv_field(&c.bound),
                c.pass
            );
        }
        let budget = r
            .budget
            .map(|b| format!("<= {}", b.as_secs_f64()))
            .unwrap_or_else(|| "none".into());
        out += &format!(
            "{},runtime,seconds,{},{},{}\n",
            r.id,
            r.elapsed.as_secs_f64(),
            csv_field(&budget),
            r.within_budget()
        );
    }
    out
}

fn constant(w: usize, h: usize, channels: usize, v: f64) -> ImageBuffer {
    ImageBuffer::filled(w, h, channels, ColorSpace::Srgb, v).expect("valid size")
}

fn synthesis(o: &dyn Oracle, r: &mut Recorder) {
    for sigma in [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let k = gaussian_kernel(sigma, BLUR_KERNEL_SIZE).expect("valid sigma");
        let n = BLUR_KERNEL_SIZE;
        r.within(format!("kernel sigma={sigma}"), "sum", k.sum(), 1.0, 1e-12);
        let symmetric = (0..n).all(|i| {
            (0..n).all(|j| {
                let v = k.at(i, j);
                v == k.at(j, i) && v == k.at(n - 1 - i, j) && v == k.at(i, n - 1 - j)
            })
        });
        r.flag(format!("kernel sigma={sigma}"), "symmetric", symmetric);
    }
    let base = constant(256, 256, 1, 0.5);
    for sigma in [10.0, 25.0, 50.0] {
        for seed in 0..10u64 {
            let noisy = apply_awgn(&base, sigma, seed).expect("valid sigma");
            let diff: Vec<f64> = noisy
                .data()
                .iter()
                .zip(base.data())
                .map(|(a, b)| (a - b) * 255.0)
                .collect();
            let s = o.std_dev(&diff);
            r.within(
                format!("awgn sigma={sigma} seed={seed}"),
                "empirical_sigma",
                s,
                sigma,
                0.02 * sigma,
            );
        }
    }
    let img = fixtures::natural(5, 64, 64);
    for q in 10..=90u8 {
        let result = jpeg::encode(&img, q)
            .and_then(|b| jpeg::decode(&b))
            .and_then(|d| estimate_quality_from_tables(&d.tables));
        match result {
            Ok(p) => {
                let got = p.quality().unwrap_or(0);
                r.push(
                    format!("dqt q={q}"),
                    "recovered_quality",
                    got as f64,
                    format!("== {q}"),
                    got == q,
                );
            }
            Err(e) => r.error(format!("dqt q={q}"), "recovered_quality", e),
        }
    }
}

fn estimators(_o: &dyn Oracle, r: &mut Recorder) {
    let cal = Calibration::builtin();
    let base = constant(128, 128, 1, 0.5);
    for sigma in [5.0, 15.0, 25.0, 50.0] {
        for seed in 0..10u64 {
            let noisy = apply_awgn(&base, sigma, 100 + seed).expect("valid sigma");
            let case = format!("noise sigma={sigma} seed={seed}");
            match estimate_noise_sigma(&noisy, None) {
                Ok(p) => r.within(
                    case,
                    "sigma_hat",
                    p.sigma_noise().unwrap_or(f64::NAN),
                    sigma,
                    0.1 * sigma,
                ),
                Err(e) => r.error(case, "sigma_hat", e),
            }
        }
    }
    for square in [10, 16, 24] {
        let board = fixtures::checkerboard(128, 128, square, 0.2, 0.8);
        for sigma in [0.5, 1.5, 2.5] {
            let case = format!("blur square={square} sigma={sigma}");
            let blurred = apply_blur(&board, sigma).expect("valid sigma");
            match estimate_blur_sigma(&blurred, None, cal) {
                Ok(p) => r.within(
                    case,
                    "sigma_hat",
                    p.sigma_blur().unwrap_or(f64::NAN),
                    sigma,
                    0.3,
                ),
                Err(e) => r.error(case, "sigma_hat", e),
            }
        }
    }
    for seed in [101u64, 202, 303] {
        let img = fixtures::natural(seed, 128, 128);
        for q in [10u8, 30, 50, 70] {
            let decoded = match jpeg::encode(&img, q).and_then(|b| jpeg::decode(&b)) {
                Ok(d) => d,
                Err(e) => {
                    r.error(format!("jpeg seed={seed} q={q}"), "codec", e);
                    continue;
                }
            };
            match estimate_quality_from_tables(&decoded.tables) {
                Ok(p) => {
                    let got = p.quality().unwrap_or(0);
                    r.push(
                        format!("jpeg bitstream seed={seed} q={q}"),
                        "q_hat",
                        got as f64,
                        format!("== {q}"),
                        got == q,
                    )
                }
                Err(e) => r.error(format!("jpeg bitstream seed={seed} q={q}"), "q_hat", e),
            }
            match estimate_quality_from_pixels(&decoded.image, None, cal) {
                Ok(p) => r.within(
                    format!("jpeg pixels seed={seed} q={q}"),
                    "q_hat",
                    p.quality().unwrap_or(0) as f64,
                    q as f64,
                    10.0,
                ),
                Err(e) => r.error(format!("jpeg pixels seed={seed} q={q}"), "q_hat", e),
            }
        }
    }
}

fn restoration(o: &dyn Oracle, r: &mut Recorder) {
    let noise = DegradationParam::noise(25.0, 1.0).expect("valid");
    for seed in fixtures::NATURAL_SEEDS {
        let clean = fixtures::natural(seed, 256, 256);
        let noisy = apply_awgn(&clean, 25.0, seed + 1000).expect("valid");
        let case = format!("tv seed={seed}");
        match denoise_tv(&noisy, &noise, 1.0) {
            Ok(out) => r.at_least(
                case,
                "psnr_gain_db",
                o.psnr(&out, &clean) - o.psnr(&noisy, &clean),
                3.0,
            ),
            Err(e) => r.error(case, "psnr_gain_db", e),
        }
    }
    let clean = fixtures::natural(11, 128, 128);
    let blurred = apply_blur(&clean, 1.5).expect("valid");
    let blur = DegradationParam::blur(1.5, 1.0).expect("valid");
    match restore_full(&blurred, Task::Deblur, &blur, 1.0) {
        Ok(out) => r.at_least(
            "wiener seed=11 sigma=1.5",
            "psnr_db",
            o.psnr(&out, &clean),
            40.0,
        ),
        Err(e) => r.error("wiener seed=11 sigma=1.5", "psnr_db", e),
    }
    for seed in fixtures::NATURAL_SEEDS {
        let clean = fixtures::natural(seed, 128, 128);
        for q in [10u8, 20, 30] {
            let case = format!("deblock seed={seed} q={q}");
            let result = jpeg::encode(&clean, q)
                .and_then(|b| jpeg::decode(&b))
                .and_then(|d| {
                    let predicted = estimate_quality_from_tables(&d.tables)?;
                    let out = deblock_dct_stats(&d.image, &predicted, 1.0)?.image;
                    Ok((d.image, out))
                });
            match result {
                Ok((before, after)) => {
                    let (b0, b1) = (o.blockiness(&before), o.blockiness(&after));
                    r.push(case, "blockiness_after", b1, format!("< {b0}"), b1 < b0);
                }
                Err(e) => r.error(case, "blockiness_after", e),
            }
        }
    }
}

/// Nine strengths `0, 0.25, ..., 2`.
pub fn strength_grid() -> Vec<f64> {
    (0..9).map(|i| i as f64 * 0.25).collect()
}

fn per_object(o: &dyn Oracle, r: &mut Recorder) {
    let (clean, smooth) = fixtures::two_region(256, 256, 7);
    let noisy = apply_awgn(&clean, 25.0, 77).expect("valid").quantize_u8();
    let texture = BinaryMask::from_fn(256, 256, |x, y| !smooth.get(x, y));
    let grid = strength_grid();

    let outcome = (|| -> Result<(f64, f64, f64, f64, f64), Error> {
        let global_param = estimate_noise_sigma(&noisy, None)?;
        let mut best_global = f64::NEG_INFINITY;
        for &s in &grid {
            best_global = best_global.max(o.psnr(&denoise_tv(&noisy, &global_param, s)?, &clean));
        }

        // Per object: each region's own estimate, strength picked per region
        // against the truth (standing in for the user's choice).
        let mut project = Project::new(noisy.clone(), None)?;
        let mut chosen = Vec::new();
        for (id, region) in [("smooth", &smooth), ("texture", &texture)] {
            let mask = region.to_mask();
            let param = estimate_noise_sigma(&noisy, Some(&mask))?;
            let mut best = (f64::INFINITY, 0.0);
            for &s in &grid {
                let out = denoise_tv(&noisy, &param, s)?;
                let err = region_mse(&out, &clean, region);
                if err < best.0 {
                    best = (err, s);
                }
            }
            let mut layer = ObjectLayer::new(id, mask)?;
            layer.task = LayerTask::Denoise;
            layer.predicted = Some(param);
            layer.strength = best.1;
            project.add_layer(layer)?;
            chosen.push(best.1);
        }
        let per_object = o.psnr(&project.composite()?, &clean);
        Ok((
            per_object,
            best_global,
            chosen[0],
            chosen[1],
            o.psnr(&noisy, &clean),
        ))
    })();
    match outcome {
        Ok((per_object, global, s_smooth, s_texture, input)) => {
            r.push("two-region sigma=25", "noisy_psnr_db", input, "info", true);
            r.push(
                "two-region sigma=25",
                "best_global_psnr_db",
                global,
                "info",
                true,
            );
            r.push(
                "two-region sigma=25",
                "strength_smooth",
                s_smooth,
                "info",
                true,
            );
            r.push(
                "two-region sigma=25",
                "strength_texture",
                s_texture,
                "info",
                true,
            );
            r.at_least(
                "two-region sigma=25",
                "per_object_margin_db",
                per_object - global,
                0.0,
            );
        }
        Err(e) => r.error("two-region sigma=25", "per_object_margin_db", e),
    }
}

fn region_mse(a: &ImageBuffer, b: &ImageBuffer, region: &BinaryMask) -> f64 {
    let n = a.pixel_count();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pa, pb) in a.planes().zip(b.planes()) {
        for i in 0..n {
            if region.bits()[i] {
                sum += (pa[i] - pb[i]).powi(2);
                count += 1;
            }
        }
    }
    sum / count.max(1) as f64
}

fn monotone(o: &dyn Oracle, r: &mut Recorder) {
    let strengths = [0.0, 0.5, 1.0, 1.5, 2.0];
    for seed in fixtures::NATURAL_SEEDS {
        let clean = fixtures::natural(seed, 96, 96);
        let noisy = apply_awgn(&clean, 25.0, seed).expect("valid");
        let noise = DegradationParam::noise(25.0, 1.0).expect("valid");
        let tvs: Result<Vec<f64>, Error> = strengths
            .iter()
            .map(|&s| Ok(o.total_variation(&denoise_tv(&noisy, &noise, s)?)))
            .collect();
        match tvs {
            Ok(t) => r.flag(
                format!("denoise seed={seed} tv={t:?}"),
                "tv_non_increasing",
                t.windows(2).all(|w| w[1] <= w[0]),
            ),
            Err(e) => r.error(format!("denoise seed={seed}"), "tv_non_increasing", e),
        }

        let q = 40;
        let counts: Result<Vec<usize>, Error> = jpeg::encode(&clean, q)
            .and_then(|b| jpeg::decode(&b))
            .and_then(|d| {
                let p = DegradationParam::jpeg(q, 1.0)?;
                strengths
                    .iter()
                    .map(|&s| Ok(deblock_dct_stats(&d.image, &p, s)?.zeroed))
                    .collect()
            });
        match counts {
            Ok(c) => r.flag(
                format!("deblock seed={seed} q={q} zeroed={c:?}"),
                "zeroed_non_decreasing",
                c.windows(2).all(|w| w[1] >= w[0]),
            ),
            Err(e) => r.error(format!("deblock seed={seed}"), "zeroed_non_decreasing", e),
        }

        let blurred = apply_blur(&clean, 1.5).expect("valid");
        let cases = [
            (Task::Deblur, blurred, DegradationParam::blur(1.5, 1.0)),
            (
                Task::Denoise,
                noisy.clone(),
                DegradationParam::noise(25.0, 1.0),
            ),
            (Task::Deblock, noisy, DegradationParam::jpeg(30, 1.0)),
        ];
        for (task, img, param) in cases {
            let case = format!("{task:?} seed={seed}");
            match param.and_then(|p| restore_full(&img, task, &p, 0.0)) {
                Ok(out) => r.flag(case, "strength0_bit_identical", bit_identical(&out, &img)),
                Err(e) => r.error(case, "strength0_bit_identical", e),
            }
        }
    }
}

fn bit_identical(a: &ImageBuffer, b: &ImageBuffer) -> bool {
    a.same_shape(b)
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn pipeline(_o: &dyn Oracle, r: &mut Recorder) {
    // Projects hold 8-bit sources, so fixtures start on that grid.
    let disk = fixtures::disk(96, 96, 25.0).0.quantize_u8();
    let natural = fixtures::natural(3, 80, 64).quantize_u8();
    for (name, img) in [("disk", &disk), ("natural", &natural)] {
        let result = (|| -> Result<[bool; 3], Error> {
            let mut empty = Project::new(img.clone(), None)?;
            let zero_layers = bit_identical(&empty.composite()?, img);

            let mut zero_mask = Project::new(img.clone(), None)?;
            let mut layer =
                ObjectLayer::new("zero", Mask::filled(img.width(), img.height(), 0.0)?)?;
            layer.task = LayerTask::Denoise;
            layer.predicted = Some(DegradationParam::noise(25.0, 1.0)?);
            zero_mask.add_layer(layer)?;
            let all_zero_masks = bit_identical(&zero_mask.composite()?, img);

            let mut identity = Project::new(img.clone(), None)?;
            let mut layer =
                ObjectLayer::new("full", Mask::filled(img.width(), img.height(), 1.0)?)?;
            layer.enhance = EnhanceSettings::default();
            identity.add_layer(layer)?;
            let default_enhance = bit_identical(&identity.composite()?, img);
            Ok([zero_layers, all_zero_masks, default_enhance])
        })();
        match result {
            Ok([a, b, c]) => {
                r.flag(format!("{name} zero layers"), "composite_is_source", a);
                r.flag(format!("{name} all-zero masks"), "composite_is_source", b);
                r.flag(format!("{name} default enhance"), "composite_is_source", c);
            }
            Err(e) => r.error(format!("{name} identities"), "composite_is_source", e),
        }
    }

    let scratch = ScratchDir::new("pipeline");
    match project_round_trip(&scratch) {
        Ok((dir_ok, zip_ok)) => {
            r.flag(
                "project directory save/load",
                "composite_bit_identical",
                dir_ok,
            );
            r.flag("project zip save/load", "composite_bit_identical", zip_ok);
        }
        Err(e) => r.error("project save/load", "composite_bit_identical", e),
    }
    match parity(&scratch) {
        Ok(results) => {
            for (name, same) in results {
                r.flag(
                    format!("disk fixture export {name}"),
                    "cli_http_byte_identical",
                    same,
                );
            }
        }
        Err(e) => r.error("disk fixture", "cli_http_byte_identical", e),
    }
}

/// Noisy disk fixture used for the end-to-end parity runs.
pub fn parity_fixture() -> ImageBuffer {
    let (disk, _) = fixtures::disk(96, 96, 25.0);
    apply_awgn(&disk, 15.0, 5).expect("valid").quantize_u8()
}

fn project_round_trip(scratch: &ScratchDir) -> Result<(bool, bool), Error> {
    let img = parity_fixture();
    let mut project = Project::new(img.clone(), None)?;
    let seg = segment_builtin(&img, &ClickPrompt::new(vec![ClickPoint::fg(48, 48)]))?;
    let mut layer = ObjectLayer::new("disk", seg.mask)?;
    layer.task = LayerTask::Denoise;
    layer.predicted = Some(estimate_noise_sigma(&img, Some(layer.mask()))?);
    layer.strength = 1.25;
    layer.enhance.contrast = 1.2;
    project.add_layer(layer)?;
    let before = project.composite()?;
    let dir = scratch.path.join("project");
    project.save(&dir)?;
    let zip = scratch.path.join("project.zip");
    project.save(&zip)?;
    let from_dir = Project::load(&dir)?.composite()?;
    let from_zip = Project::load(&zip)?.composite()?;
    Ok((
        bit_identical(&before, &from_dir),
        bit_identical(&before, &from_zip),
    ))
}

/// Runs the same session through the CLI and the HTTP router and compares
/// the exported bytes.
fn parity(scratch: &ScratchDir) -> Result<Vec<(&'static str, bool)>, String> {
    let img = parity_fixture();
    let png = encode_png(&img).map_err(|e| e.to_string())?;
    let image_path = scratch.path.join("disk.png");
    std::fs::write(&image_path, &png).map_err(|e| e.to_string())?;
    let project = scratch.path.join("cli-project.zip");
    let out_png = scratch.path.join("cli.png");
    let out_jpg = scratch.path.join("cli.jpg");

    let steps = [
        vec![
            "new",
            image_path.to_str().unwrap_or_default(),
            "-p",
            project.to_str().unwrap_or_default(),
            "--overwrite",
        ],
        vec![
            "segment",
            "-p",
            project.to_str().unwrap_or_default(),
            "--point",
            "48,48",
        ],
        vec![
            "estimate",
            "-p",
            project.to_str().unwrap_or_default(),
            "-l",
            "layer-1",
            "-t",
            "denoise",
        ],
        vec![
            "restore",
            "-p",
            project.to_str().unwrap_or_default(),
            "-l",
            "layer-1",
            "-s",
            "1.25",
        ],
        vec![
            "enhance",
            "-p",
            project.to_str().unwrap_or_default(),
            "-l",
            "layer-1",
            "--contrast",
            "1.2",
        ],
    ];
    for step in steps {
        run_cli(&step)?;
    }
    run_export(&project, &out_png, FormatArg::Png)?;
    run_export(&project, &out_jpg, FormatArg::Jpeg)?;
    let cli_png = std::fs::read(&out_png).map_err(|e| e.to_string())?;
    let cli_jpg = std::fs::read(&out_jpg).map_err(|e| e.to_string())?;

    let (http_png, http_jpg) = http_session(png)?;
    Ok(vec![
        ("png", cli_png == http_png),
        ("jpeg q95", cli_jpg == http_jpg),
    ])
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    use clap::Parser;
    let parsed =
        cli::Cli::try_parse_from(std::iter::once("objrestore").chain(args.iter().copied()))
            .map_err(|e| e.to_string())?;
    cli::run(parsed.command)
        .map(|_| ())
        .map_err(|e| format!("{args:?}: {e}"))
}

fn run_export(
    project: &std::path::Path,
    out: &std::path::Path,
    format: FormatArg,
) -> Result<(), String> {
    cli::run(Command::Export {
        project: project.into(),
        out: out.into(),
        format,
        quality: 95,
        force: false,
    })
    .map(|_| ())
    .map_err(|e| e.to_string())
}

fn http_session(png: Vec<u8>) -> Result<(Vec<u8>, Vec<u8>), String> {
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let app = router(AppState::new(SessionStore::in_memory(), Config::default()));
        let call = |method: &str, uri: String, body: Vec<u8>| {
            let app = app.clone();
            let req = Request::builder()
                .method(method)
                .uri(uri)
                .body(Body::from(body))
                .expect("request");
            async move {
                let resp = app.oneshot(req).await.map_err(|e| e.to_string())?;
                let status = resp.status();
                let bytes = resp
                    .into_body()
                    .collect()
                    .await
                    .map_err(|e| e.to_string())?
                    .to_bytes()
                    .to_vec();
                if !status.is_success() {
                    return Err(format!("{status}: {}", String::from_utf8_lossy(&bytes)));
                }
                Ok::<Vec<u8>, String>(bytes)
            }
        };
        let created: serde_json::Value =
            serde_json::from_slice(&call("POST", "/sessions".into(), png).await?)
                .map_err(|e| e.to_string())?;
        let id = created["id"].as_str().ok_or("no session id")?.to_string();
        let base = format!("/sessions/{id}");
        call(
            "POST",
            format!("{base}/segment"),
            br#"{"points":[{"x":48,"y":48,"label":"foreground"}]}"#.to_vec(),
        )
        .await?;
        call(
            "POST",
            format!("{base}/layers/layer-1/estimate"),
            br#"{"task":"denoise"}"#.to_vec(),
        )
        .await?;
        call(
            "POST",
            format!("{base}/layers/layer-1/restore"),
            br#"{"strength_scale":1.25}"#.to_vec(),
        )
        .await?;
        call(
            "POST",
            format!("{base}/layers/layer-1/enhance"),
            br#"{"contrast":1.2}"#.to_vec(),
        )
        .await?;
        let png = call(
            "POST",
            format!("{base}/export"),
            serde_json::to_vec(&ExportFormat::Png).expect("json"),
        )
        .await?;
        let jpg = call(
            "POST",
            format!("{base}/export"),
            serde_json::to_vec(&ExportFormat::Jpeg {
                quality: 95,
                force: false,
            })
            .expect("json"),
        )
        .await?;
        Ok((png, jpg))
    })
}

fn segmentation(o: &dyn Oracle, r: &mut Recorder) {
    let consistent = |mask: &BinaryMask, points: &[ClickPoint]| {
        points
            .iter()
            .all(|p| mask.get(p.x, p.y) == (p.label == ClickLabel::Foreground))
    };
    for (w, radius) in [(96usize, 25.0), (128, 30.0), (64, 20.0)] {
        let (img, truth) = fixtures::disk(w, w, radius);
        let points = vec![ClickPoint::fg(w / 2, w / 2)];
        let case = format!("disk {w}px r={radius} clean");
        match segment_builtin(&img, &ClickPrompt::new(points.clone())) {
            Ok(res) => {
                r.at_least(case.clone(), "iou", o.iou(&res.hard_mask, &truth), 0.95);
                r.flag(
                    case,
                    "click_consistent",
                    consistent(&res.hard_mask, &points),
                );
            }
            Err(e) => r.error(case, "iou", e),
        }
    }
    let (img, truth) = fixtures::disk(96, 96, 25.0);
    for seed in 0..5u64 {
        let noisy = apply_awgn(&img, 25.0, seed).expect("valid");
        let points = vec![ClickPoint::fg(48, 48)];
        let mut prompt = ClickPrompt::new(points.clone());
        prompt.tolerance = 20.0;
        let case = format!("disk 96px sigma=25 seed={seed}");
        match segment_builtin(&noisy, &prompt) {
            Ok(res) => {
                r.at_least(case.clone(), "iou", o.iou(&res.hard_mask, &truth), 0.80);
                r.flag(
                    case,
                    "click_consistent",
                    consistent(&res.hard_mask, &points),
                );
            }
            Err(e) => r.error(case, "iou", e),
        }
    }
    match external_contract(&img) {
        Ok(results) => {
            for (case, ok) in results {
                r.flag(case, "contract", ok);
            }
        }
        Err(e) => r.error("external mock server", "contract", e),
    }
}

/// Pass-through, click-violation and timeout behaviour of the external
/// client against an in-process mock server.
fn external_contract(img: &ImageBuffer) -> Result<Vec<(String, bool)>, String> {
    use axum::body::Bytes;
    use axum::routing::post;
    use base64::Engine;

    let (w, h) = (img.width(), img.height());
    let b64 = |m: &Mask| {
        objrestore::io::encode_mask_png(m)
            .map(|png| base64::engine::general_purpose::STANDARD.encode(png))
    };
    let ones =
        b64(&Mask::filled(w, h, 1.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let zeros =
        b64(&Mask::filled(w, h, 0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ok_body = serde_json::json!({ "mask_png": ones, "score": 0.9 }).to_string();
    let bad_body = serde_json::json!({ "mask_png": zeros, "score": 0.9 }).to_string();

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(1)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    // Handlers drain the upload so the client never sees a reset mid-send.
    let app = axum::Router::new()
        .route("/ok", post(move |_: Bytes| async move { ok_body }))
        .route("/violate", post(move |_: Bytes| async move { bad_body }))
        .route(
            "/slow",
            post(|_: Bytes| async {
                tokio::time::sleep(Duration::from_secs(3)).await;
                "{}"
            }),
        );
    rt.spawn(async move {
        let _ = axum::serve(listener, app).await;
    });

    let prompt = ClickPrompt::new(vec![ClickPoint::fg(w / 2, h / 2)]);
    let client = |path: &str| ExternalSegmenter::new(format!("http://{addr}{path}"));
    let mut out = Vec::new();

    let pass = segment_external(img, &prompt, &client("/ok"));
    out.push((
        "external pass-through all-ones".to_string(),
        pass.as_ref()
            .is_ok_and(|r| r.hard_mask.count() == w * h && r.score == 0.9),
    ));
    let violation = segment_external(img, &prompt, &client("/violate"));
    out.push((
        "external click violation".to_string(),
        matches!(violation, Err(Error::ExternalProtocol(_))),
    ));
    let start = Instant::now();
    let slow = segment_external(
        img,
        &prompt,
        &client("/slow").with_timeout(Duration::from_millis(300)),
    );
    let waited = start.elapsed();
    out.push((
        format!("external timeout after {:.2}s", waited.as_secs_f64()),
        matches!(slow, Err(Error::ExternalUnavailable(_))) && waited < Duration::from_secs(2),
    ));
    rt.shutdown_background();
    Ok(out)
}

/// Temporary directory removed on drop.
struct ScratchDir {
    path: PathBuf,
}

impl ScratchDir {
    fn new(tag: &str) -> Self {
        let path = std::env::temp_dir().join(format!(
            "objrestore-bench-{tag}-{:016x}",
            rand::random::<u64>()
        ));
        let _ = std::fs::create_dir_all(&path);
        ScratchDir { path }
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}
