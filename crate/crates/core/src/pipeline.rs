//! Deterministic batch augmentation over image directories.
//!
//! Each input gets its own random stream: a ChaCha8 generator keyed by the
//! master seed, with the stream number set to the image's index in the
//! name-sorted input list. Results therefore do not depend on directory
//! enumeration order or on how many workers run.
//!
//! Directory layout:
//!
//! * synthetic tasks read every image directly inside `input_dir`;
//! * real tasks read `input_dir/input/` and pair each file with the file of
//!   the same name in `input_dir/target/` when it exists.
//!
//! Outputs go to `output_dir/input/<stem>.<ext>`, untouched copies of the
//! targets to `output_dir/target/`, and the manifest to
//! `output_dir/manifest.json`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::{add_noise, degrade_sr, DegradationConfig, KernelSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::io::{list_images, load_image, save_image, ImageFormat};
use crate::mask::MaskSpec;
use crate::sfm::{maybe_apply_sfm, SfmConfig};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const INPUT_SUBDIR: &str = "input";
pub const TARGET_SUBDIR: &str = "target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// SFM on the HR image, then blur + downsample (+ noise).
    SrSynthetic,
    /// SFM directly on the provided LR inputs.
    SrReal,
    /// SFM on the clean image, then synthetic noise.
    DenoiseSynthetic,
    /// SFM directly on the provided noisy inputs.
    DenoiseReal,
}

impl Task {
    pub fn is_synthetic(self) -> bool {
        matches!(self, Task::SrSynthetic | Task::DenoiseSynthetic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: Task,
    pub seed: u64,
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: ImageFormat,
    #[serde(default)]
    pub sfm: SfmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationConfig>,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sfm
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match (self.task, &self.degradation) {
            (Task::SrSynthetic, None) | (Task::DenoiseSynthetic, None) => Err(Error::Config(
                "synthetic tasks need a [degradation] section".into(),
            )),
            (Task::SrReal, Some(_)) | (Task::DenoiseReal, Some(_)) => Err(Error::Config(
                "real-data tasks take no [degradation] section".into(),
            )),
            (Task::DenoiseSynthetic, Some(d))
                if d.kernel != KernelSpec::Identity || d.scale != 1 =>
            {
                Err(Error::Config(
                    "denoise_synthetic only adds noise; use kernel = \"identity\" and scale = 1"
                        .into(),
                ))
            }
            (_, Some(d)) => d.validate().map_err(|e| Error::Config(e.to_string())),
            (_, None) => Ok(()),
        }
    }
}

/// Random stream for image `index` under `seed`.
pub fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub index: usize,
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub index: usize,
    /// Relative to `input_dir`.
    pub input: String,
    /// Relative to `output_dir`.
    pub output: Option<String>,
    pub target: Option<String>,
    pub status: RecordStatus,
    pub error: Option<String>,
    pub applied: bool,
    pub mask: Option<MaskSpec>,
    /// Gaussian noise sigma used (byte units), for AWGN models.
    pub noise_sigma: Option<f64>,
    pub kernel_sigma: Option<f64>,
    pub seed: SeedLineage,
    pub clamped_after_sfm: usize,
    pub clamped_on_save: usize,
    pub output_sha256: Option<String>,
    pub target_sha256: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub failed: usize,
    pub applied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub summary: Summary,
    pub records: Vec<ImageRecord>,
}

impl Manifest {
    pub fn has_failures(&self) -> bool {
        self.summary.failed > 0
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

struct Job {
    index: usize,
    input: PathBuf,
    input_rel: String,
    target: Option<(PathBuf, String)>,
    output_rel: String,
    duplicate: bool,
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn plan_jobs(cfg: &PipelineConfig) -> Result<Vec<Job>> {
    let (scan_dir, prefix) = if cfg.task.is_synthetic() {
        (cfg.input_dir.clone(), PathBuf::new())
    } else {
        (
            cfg.input_dir.join(INPUT_SUBDIR),
            PathBuf::from(INPUT_SUBDIR),
        )
    };
    let inputs = list_images(&scan_dir)?;
    if inputs.is_empty() {
        return Err(Error::invalid(format!(
            "no images found in {}",
            scan_dir.display()
        )));
    }
    let mut stems = HashSet::new();
    let ext = cfg.format.extension();
    Ok(inputs
        .into_iter()
        .enumerate()
        .map(|(index, input)| {
            let name = input.file_name().expect("listed file").to_owned();
            let stem = input
                .file_stem()
                .expect("listed file")
                .to_string_lossy()
                .into_owned();
            let duplicate = !stems.insert(stem.clone());
            let target = if cfg.task.is_synthetic() {
                Some((input.clone(), rel_string(&prefix.join(&name))))
            } else {
                let t = cfg.input_dir.join(TARGET_SUBDIR).join(&name);
                t.is_file()
                    .then(|| (t, rel_string(&Path::new(TARGET_SUBDIR).join(&name))))
            };
            Job {
                index,
                input_rel: rel_string(&prefix.join(&name)),
                input,
                target,
                output_rel: format!("{INPUT_SUBDIR}/{stem}.{ext}"),
                duplicate,
            }
        })
        .collect())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn process(cfg: &PipelineConfig, job: &Job) -> ImageRecord {
    let mut record = ImageRecord {
        index: job.index,
        input: job.input_rel.clone(),
        output: None,
        target: None,
        status: RecordStatus::Ok,
        error: None,
        applied: false,
        mask: None,
        noise_sigma: None,
        kernel_sigma: cfg.degradation.and_then(|d| d.kernel.sigma()),
        seed: SeedLineage {
            master: cfg.seed,
            index: job.index,
            stream: job.index as u64,
        },
        clamped_after_sfm: 0,
        clamped_on_save: 0,
        output_sha256: None,
        target_sha256: None,
    };
    if let Err(e) = process_into(cfg, job, &mut record) {
        record.status = RecordStatus::Failed;
        record.error = Some(e.to_string());
    }
    record
}

fn process_into(cfg: &PipelineConfig, job: &Job, record: &mut ImageRecord) -> Result<()> {
    if job.duplicate {
        return Err(Error::invalid(format!(
            "output name {} already used by an earlier input",
            job.output_rel
        )));
    }
    let mut rng = image_rng(cfg.seed, job.index);
    let img = load_image(&job.input)?;
    let sfm = maybe_apply_sfm(&img, &cfg.sfm, &mut rng)?;
    record.applied = sfm.applied;
    record.mask = sfm.spec;
    record.clamped_after_sfm = sfm.clamped;

    let out = match (cfg.task, cfg.degradation) {
        (Task::SrSynthetic, Some(d)) => {
            let lr = degrade_sr(&sfm.image, &d, &mut rng)?;
            record.noise_sigma = lr.noise_sigma;
            lr.image
        }
        (Task::DenoiseSynthetic, Some(d)) => {
            let mut clean = sfm.image;
            if matches!(d.noise, NoiseModel::PoissonGaussian { .. }) {
                // shot noise is undefined for negative intensities
                record.clamped_after_sfm += clean.clamp_to_range();
            }
            let noisy = add_noise(&clean, &d.noise, &mut rng)?;
            record.noise_sigma = noisy.noise_sigma;
            noisy.image
        }
        _ => sfm.image,
    };

    let out_path = cfg.output_dir.join(&job.output_rel);
    let report = save_image(&out, &out_path, cfg.format)?;
    record.clamped_on_save = report.clamped;
    record.output = Some(job.output_rel.clone());
    record.output_sha256 = Some(sha256_file(&out_path)?);

    if let Some((src, rel)) = &job.target {
        let dst = cfg
            .output_dir
            .join(TARGET_SUBDIR)
            .join(Path::new(rel).file_name().expect("target has a file name"));
        fs::copy(src, &dst).map_err(|e| Error::io(&dst, e))?;
        record.target = Some(rel_string(
            &Path::new(TARGET_SUBDIR).join(dst.file_name().expect("file name")),
        ));
        record.target_sha256 = Some(sha256_file(&dst)?);
    }
    Ok(())
}

fn execute(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Manifest> {
    cfg.validate()?;
    let jobs = plan_jobs(cfg)?;
    for sub in [INPUT_SUBDIR, TARGET_SUBDIR] {
        let dir = cfg.output_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    let records: Vec<ImageRecord> =
        pool.install(|| jobs.par_iter().map(|job| process(cfg, job)).collect());
    let summary = Summary {
        total: records.len(),
        failed: records
            .iter()
            .filter(|r| r.status == RecordStatus::Failed)
            .count(),
        applied: records.iter().filter(|r| r.applied).count(),
    };
    Ok(Manifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: cfg.clone(),
        summary,
        records,
    })
}

/// Processes every input and writes `manifest.json` into the output dir.
///
/// Per-image failures are recorded in the manifest rather than aborting
/// the run; check [`Manifest::has_failures`].
pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Manifest> {
    let manifest = execute(cfg, opts)?;
    let path = cfg.output_dir.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Re-derives every output from the manifest's config into a scratch
/// directory and checks that records and file hashes match both the
/// manifest and the files currently on disk.
pub fn verify_manifest(path: &Path, opts: &RunOptions) -> Result<VerifyReport> {
    let manifest = Manifest::load(path)?;
    let scratch = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let mut cfg = manifest.config.clone();
    cfg.output_dir = scratch.path().to_path_buf();
    let fresh = execute(&cfg, opts)?;

    let mut report = VerifyReport::default();
    if fresh.records.len() != manifest.records.len() {
        report.problems.push(format!(
            "manifest lists {} images, inputs now give {}",
            manifest.records.len(),
            fresh.records.len()
        ));
    }
    for (old, new) in manifest.records.iter().zip(&fresh.records) {
        report.checked += 1;
        if old != new {
            report.problems.push(format!(
                "record {} ({}) differs on re-derivation",
                old.index, old.input
            ));
            continue;
        }
        let on_disk = [
            (&old.output, &old.output_sha256),
            (&old.target, &old.target_sha256),
        ];
        for (rel, hash) in on_disk {
            if let (Some(rel), Some(hash)) = (rel, hash) {
                let file = manifest.config.output_dir.join(rel);
                match sha256_file(&file) {
                    Ok(h) if &h == hash => {}
                    Ok(_) => report.problems.push(format!(
                        "{} does not match its recorded hash",
                        file.display()
                    )),
                    Err(e) => report.problems.push(e.to_string()),
                }
            }
        }
    }
    Ok(report)
}
