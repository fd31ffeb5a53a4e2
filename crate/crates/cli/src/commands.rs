use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::json;

use sfm_core::degrade::{degrade_sr, DegradationConfig, KernelSpec, NoiseModel};
use sfm_core::io::{list_images, load_image, save_image, ImageFormat};
use sfm_core::mask::{
    band_mask_probability, max_radius, sample_central, sample_targeted,
    targeted_band_mask_probability,
};
use sfm_core::pipeline::{image_rng, run_pipeline, verify_manifest, PipelineConfig, RunOptions};
use sfm_core::sfm::{maybe_apply_sfm, SfmConfig};
use sfm_core::spectra::{
    radial_psd_with, snr_curve_from_variance, PsdOptions, RadialProfile, Window,
};
use sfm_core::transform::dct2_forward;

use crate::{DegradeArgs, Failure, MaskStatsArgs, ModeArg, RunArgs, SfmArgs};

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create_csv(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CmdResult {
    w.flush().map_err(|e| io_failure(path, e))
}

/// A single file, or every image in a directory (name order).
fn collect_inputs(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    if input.is_dir() {
        let files = list_images(input)?;
        if files.is_empty() {
            return Err(Failure::Config(format!("no images in {}", input.display())));
        }
        Ok(files)
    } else if input.is_file() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(Failure::Config(format!(
            "{} does not exist",
            input.display()
        )))
    }
}

fn parse_format(s: &str) -> Result<ImageFormat, Failure> {
    s.parse::<ImageFormat>().map_err(Failure::from)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn write_json(path: &Path, value: &serde_json::Value) -> CmdResult {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn partial(failed: usize, total: usize) -> CmdResult {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Partial(format!(
            "{failed} of {total} images failed"
        )))
    }
}

pub fn dct(input: &Path, out: &Path) -> CmdResult {
    let img = load_image(input)?;
    let spec = dct2_forward(&img)?;
    let mut w = create_csv(out)?;
    let io = |e| io_failure(out, e);
    writeln!(w, "row,col,channel,value").map_err(io)?;
    for c in 0..spec.channels() {
        for u in 0..spec.height() {
            for v in 0..spec.width() {
                writeln!(w, "{u},{v},{c},{:e}", spec.get(u, v, c)).map_err(io)?;
            }
        }
    }
    finish(w, out)
}

fn parse_dims(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Config(format!("--dims expects HxW, got {s:?}"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h = h.trim().parse().map_err(|_| bad())?;
    let w = w.trim().parse().map_err(|_| bad())?;
    Ok((h, w))
}

pub fn mask_stats(a: &MaskStatsArgs) -> CmdResult {
    let dims = parse_dims(&a.dims)?;
    if a.n == 0 || a.bins == 0 {
        return Err(Failure::Config("--n and --bins must be positive".into()));
    }
    let r_max = max_radius(dims);
    let (rc, sd) = (a.rc * r_max, a.sd * r_max);
    let radii: Vec<f64> = (0..a.bins)
        .map(|b| (b as f64 + 0.5) / a.bins as f64 * r_max)
        .collect();
    let mut hits = vec![0u64; a.bins];
    let mut rng = image_rng(a.seed, 0);
    for _ in 0..a.n {
        let spec = match a.mode {
            ModeArg::Central => sample_central(dims, &mut rng)?,
            ModeArg::Targeted => sample_targeted(dims, rc, sd, &mut rng)?,
        };
        for (h, r) in hits.iter_mut().zip(&radii) {
            *h += spec.masks_radius(*r) as u64;
        }
    }
    let mut w = create_csv(&a.out)?;
    let io = |e| io_failure(&a.out, e);
    writeln!(w, "bin,radius,radius_fraction,empirical,expected").map_err(io)?;
    for (b, (h, r)) in hits.iter().zip(&radii).enumerate() {
        let expected = match a.mode {
            ModeArg::Central => band_mask_probability(*r, r_max)?,
            ModeArg::Targeted => targeted_band_mask_probability(*r, rc, sd),
        };
        writeln!(
            w,
            "{b},{r},{},{},{expected}",
            r / r_max,
            *h as f64 / a.n as f64
        )
        .map_err(io)?;
    }
    finish(w, &a.out)
}

pub fn sfm(a: &SfmArgs) -> CmdResult {
    let mut cfg = match a.mode {
        ModeArg::Central => SfmConfig::central(a.rate),
        ModeArg::Targeted => SfmConfig::targeted(a.rate, a.rc, a.sd),
    };
    cfg.clamp_output = a.clamp;
    cfg.validate()?;
    let format = parse_format(&a.format)?;
    let inputs = collect_inputs(&a.input)?;
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;

    let mut failed = 0;
    for (index, path) in inputs.iter().enumerate() {
        let run = || -> CmdResult {
            let img = load_image(path)?;
            let outcome = maybe_apply_sfm(&img, &cfg, &mut image_rng(a.seed, index))?;
            let name = stem(path);
            let out_path = a.out.join(format!("{name}.{}", format.extension()));
            let saved = save_image(&outcome.image, &out_path, format)?;
            let sidecar = json!({
                "input": path.display().to_string(),
                "output": out_path.file_name().map(|n| n.to_string_lossy().into_owned()),
                "seed": { "master": a.seed, "index": index },
                "applied": outcome.applied,
                "spec": outcome.spec,
                "clamped_after_sfm": outcome.clamped,
                "clamped_on_save": saved.clamped,
            });
            write_json(&a.out.join(format!("{name}.json")), &sidecar)
        };
        if let Err(e) = run() {
            failed += 1;
            warn!("{}: {e:?}", path.display());
        }
    }
    info!("sfm: {} images, {failed} failed", inputs.len());
    partial(failed, inputs.len())
}

pub fn degrade(a: &DegradeArgs) -> CmdResult {
    let cfg = DegradationConfig {
        kernel: a.kernel.parse::<KernelSpec>()?,
        scale: a.scale,
        noise: a.noise.parse::<NoiseModel>()?,
    };
    cfg.validate()?;
    let format = parse_format(&a.format)?;
    let inputs = collect_inputs(&a.input)?;
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;

    let mut failed = 0;
    for (index, path) in inputs.iter().enumerate() {
        let run = || -> CmdResult {
            let img = load_image(path)?;
            let lr = degrade_sr(&img, &cfg, &mut image_rng(a.seed, index))?;
            let name = stem(path);
            let out_path = a.out.join(format!("{name}.{}", format.extension()));
            let saved = save_image(&lr.image, &out_path, format)?;
            let sidecar = json!({
                "input": path.display().to_string(),
                "seed": { "master": a.seed, "index": index },
                "kernel": cfg.kernel,
                "scale": cfg.scale,
                "noise": cfg.noise,
                "noise_sigma": lr.noise_sigma,
                "clamped_on_save": saved.clamped,
            });
            write_json(&a.out.join(format!("{name}.json")), &sidecar)
        };
        if let Err(e) = run() {
            failed += 1;
            warn!("{}: {e:?}", path.display());
        }
    }
    partial(failed, inputs.len())
}

pub fn psd(input: &Path, bins: usize, hann: bool, out: &Path) -> CmdResult {
    let opts = PsdOptions {
        bins,
        window: if hann { Window::Hann } else { Window::None },
    };
    let inputs = collect_inputs(input)?;
    let mut profiles = Vec::new();
    let mut failed = 0;
    for path in &inputs {
        match load_image(path)
            .map_err(Failure::from)
            .and_then(|img| radial_psd_with(&img, &opts).map_err(Failure::from))
        {
            Ok(p) => profiles.push(p),
            Err(e) => {
                failed += 1;
                warn!("{}: {e:?}", path.display());
            }
        }
    }
    if profiles.is_empty() {
        return Err(Failure::Runtime("no image produced a spectrum".into()));
    }
    let avg = RadialProfile::average(&profiles)?;
    let mut w = create_csv(out)?;
    let io = |e| io_failure(out, e);
    writeln!(w, "bin,r_lo,r_hi,r_center,count,power").map_err(io)?;
    for (b, c) in avg.centers().iter().enumerate() {
        writeln!(
            w,
            "{b},{},{},{c},{},{:e}",
            avg.bin_edges[b],
            avg.bin_edges[b + 1],
            avg.counts[b],
            avg.values[b]
        )
        .map_err(io)?;
    }
    finish(w, out)?;
    partial(failed, inputs.len())
}

pub fn snr(alpha: f64, sigma2: &[f64], bins: usize, amplitude: f64, out: &Path) -> CmdResult {
    let signal = RadialProfile::power_law(bins, alpha, amplitude)?;
    let curves = sigma2
        .iter()
        .map(|v| snr_curve_from_variance(&signal, *v))
        .collect::<Result<Vec<_>, _>>()?;
    for (v, c) in sigma2.iter().zip(&curves) {
        match c.first_crossing_below(1.0) {
            Some(r) => info!("sigma^2 = {v}: SNR falls below 1 at radius {r:.4}"),
            None => info!("sigma^2 = {v}: SNR stays above 1"),
        }
    }
    let mut w = create_csv(out)?;
    let io = |e| io_failure(out, e);
    let header: Vec<String> = sigma2.iter().map(|v| format!("snr_sigma2_{v}")).collect();
    writeln!(w, "r_center,signal,{}", header.join(",")).map_err(io)?;
    for (b, c) in signal.centers().iter().enumerate() {
        let row: Vec<String> = curves
            .iter()
            .map(|k| format!("{:e}", k.values[b]))
            .collect();
        writeln!(w, "{c},{:e},{}", signal.values[b], row.join(",")).map_err(io)?;
    }
    finish(w, out)
}

fn table_mut<'a>(root: &'a mut toml::Table, key: &str) -> Result<&'a mut toml::Table, Failure> {
    root.entry(key)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| Failure::Config(format!("`{key}` must be a table")))
}

/// Reads the config file (if any) and applies flag overrides on top.
pub fn load_run_config(a: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut root = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let s = |v: &str| toml::Value::String(v.to_owned());
    let p = |v: &Path| toml::Value::String(v.to_string_lossy().into_owned());
    if let Some(v) = &a.task {
        root.insert("task".into(), s(v));
    }
    if let Some(v) = &a.input_dir {
        root.insert("input_dir".into(), p(v));
    }
    if let Some(v) = &a.output_dir {
        root.insert("output_dir".into(), p(v));
    }
    if let Some(v) = &a.format {
        root.insert("format".into(), s(v));
    }
    // TOML integers are signed 64-bit; the flag accepts any u64 and is
    // applied after deserialization.
    if a.seed.is_some() {
        root.insert("seed".into(), toml::Value::Integer(0));
    } else if !root.contains_key("seed") {
        return Err(Failure::Config(
            "a seed is required: set `seed` in the config or pass --seed".into(),
        ));
    }
    if a.mode.is_some() || a.rate.is_some() || a.rc.is_some() || a.sd.is_some() || a.clamp {
        let sfm = table_mut(&mut root, "sfm")?;
        if let Some(v) = &a.mode {
            sfm.insert("mode".into(), s(v));
        }
        if let Some(v) = a.rate {
            sfm.insert("rate".into(), toml::Value::Float(v));
        }
        if let Some(v) = a.rc {
            sfm.insert("r_center".into(), toml::Value::Float(v));
        }
        if let Some(v) = a.sd {
            sfm.insert("sigma_delta".into(), toml::Value::Float(v));
        }
        if a.clamp {
            sfm.insert("clamp_output".into(), toml::Value::Boolean(true));
        }
    }
    if a.kernel.is_some() || a.scale.is_some() || a.noise.is_some() {
        let d = table_mut(&mut root, "degradation")?;
        if let Some(v) = &a.kernel {
            d.insert("kernel".into(), s(v));
        }
        if let Some(v) = a.scale {
            d.insert("scale".into(), toml::Value::Integer(v as i64));
        }
        if let Some(v) = &a.noise {
            d.insert("noise".into(), s(v));
        }
    }
    let mut cfg: PipelineConfig = root
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Config(e.to_string()))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn pipeline_run(a: &RunArgs) -> CmdResult {
    let cfg = load_run_config(a)?;
    let manifest = run_pipeline(&cfg, &RunOptions { workers: a.workers })?;
    let s = manifest.summary;
    println!(
        "{} images, {} with SFM, {} failed; manifest at {}",
        s.total,
        s.applied,
        s.failed,
        cfg.output_dir.join("manifest.json").display()
    );
    for r in manifest.records.iter().filter(|r| r.error.is_some()) {
        eprintln!("failed: {}: {}", r.input, r.error.as_deref().unwrap_or(""));
    }
    partial(s.failed, s.total)
}

pub fn pipeline_verify(manifest: &Path, workers: usize) -> CmdResult {
    let report = verify_manifest(manifest, &RunOptions { workers })?;
    for p in &report.problems {
        eprintln!("mismatch: {p}");
    }
    if report.passed() {
        println!("verified {} records", report.checked);
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} problem(s) across {} records",
            report.problems.len(),
            report.checked
        )))
    }
}
