use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sfm_core::image::{Image, NominalRange};
use sfm_core::io::{load_image, save_image, ImageFormat};

fn sfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_images(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = Image::from_fn(32, 24, 3, NominalRange::Unit, |y, x, c| {
            ((x * 7 + y * 13 + c * 5 + i * 3) % 17) as f64 / 16.0
        })
        .unwrap();
        save_image(&img, &dir.join(format!("img{i}.png")), ImageFormat::Png8).unwrap();
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn sr_config(input: &Path, output: &Path, seed_line: &str) -> String {
    format!(
        "task = \"sr_synthetic\"\n{seed_line}\ninput_dir = {:?}\noutput_dir = {:?}\n\
         [sfm]\nmode = \"central\"\nrate = 0.5\n\
         [degradation]\nkernel = \"gaussian:1.7\"\nscale = 2\nnoise = \"awgn-blind:0,55\"\n",
        input.to_string_lossy(),
        output.to_string_lossy()
    )
}

#[test]
fn pipeline_run_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hr");
    write_images(&input, 5);
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &sr_config(&input, &out, "seed = 42"));

    let run = sfm(&["pipeline", "run", "--config", &cfg, "--workers", "3"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = out.join("manifest.json");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["summary"]["total"], 5);
    assert_eq!(m["config"]["seed"], 42);
    let lr = load_image(&out.join("input/img0.png")).unwrap();
    assert_eq!(lr.dims(), (16, 12));

    let manifest = manifest.to_string_lossy().into_owned();
    let ok = sfm(&["pipeline", "verify", "--manifest", &manifest]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));

    let blank = Image::filled(16, 12, 3, 0.0, NominalRange::Unit).unwrap();
    save_image(&blank, &out.join("input/img3.png"), ImageFormat::Png8).unwrap();
    let bad = sfm(&["pipeline", "verify", "--manifest", &manifest]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("img3"));
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hr");
    write_images(&input, 4);
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &sr_config(&input, &out, "seed = 1"));
    let run = sfm(&[
        "pipeline",
        "run",
        "--config",
        &cfg,
        "--seed",
        "18446744073709551615",
        "--rate",
        "0",
        "--scale",
        "4",
        "--noise",
        "none",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], u64::MAX);
    assert_eq!(m["summary"]["applied"], 0);
    assert_eq!(m["config"]["degradation"]["scale"], 4);
    assert_eq!(
        load_image(&out.join("input/img1.png")).unwrap().dims(),
        (8, 6)
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("hr");
    write_images(&input, 3);
    let out = tmp.path().join("out");

    // no seed anywhere
    let cfg = write_config(tmp.path(), &sr_config(&input, &out, ""));
    assert_eq!(code(&sfm(&["pipeline", "run", "--config", &cfg])), 2);

    // invalid values
    let cfg = write_config(tmp.path(), &sr_config(&input, &out, "seed = 3"));
    assert_eq!(
        code(&sfm(&[
            "pipeline", "run", "--config", &cfg, "--task", "nope"
        ])),
        2
    );
    assert_eq!(
        code(&sfm(&[
            "pipeline", "run", "--config", &cfg, "--kernel", "box:3"
        ])),
        2
    );
    assert_eq!(
        code(&sfm(&[
            "pipeline", "run", "--config", &cfg, "--rate", "1.5"
        ])),
        2
    );
    assert_eq!(
        code(&sfm(&[
            "pipeline", "run", "--config", &cfg, "--task", "sr_real"
        ])),
        2
    );

    // one undecodable input: the rest are written, exit 1
    fs::write(input.join("zzz.png"), b"garbage").unwrap();
    let run = sfm(&["pipeline", "run", "--config", &cfg]);
    assert_eq!(code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("zzz.png"));
    assert!(out.join("input/img2.png").is_file());

    assert_eq!(
        code(&sfm(&[
            "mask-stats",
            "--mode",
            "central",
            "--dims",
            "64",
            "--seed",
            "1",
            "--out",
            "x.csv"
        ])),
        2
    );
}

#[test]
fn dct_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let img = Image::filled(8, 8, 1, 1.0, NominalRange::Unit).unwrap();
    let path = tmp.path().join("flat.sfr");
    save_image(&img, &path, ImageFormat::Raw).unwrap();
    let csv = tmp.path().join("dct.csv");
    let run = sfm(&[
        "dct",
        "--in",
        path.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    let rows = read_csv(&csv);
    assert_eq!(rows[0], ["row", "col", "channel", "value"]);
    assert_eq!(rows.len(), 65);
    let dc: f64 = rows[1][3].parse().unwrap();
    assert!((dc - 8.0).abs() < 1e-12);
    assert!(rows[2..]
        .iter()
        .all(|r| r[3].parse::<f64>().unwrap().abs() < 1e-12));
}

#[test]
fn mask_stats_tracks_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in ["central", "targeted"] {
        let csv = tmp.path().join(format!("{mode}.csv"));
        let run = sfm(&[
            "mask-stats",
            "--mode",
            mode,
            "--dims",
            "64x64",
            "--n",
            "50000",
            "--seed",
            "7",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&run), 0);
        let rows = read_csv(&csv);
        assert_eq!(rows.len(), 21);
        for r in &rows[1..] {
            let (emp, exp): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
            assert!((emp - exp).abs() < 0.015, "{mode}: {r:?}");
        }
    }
}

#[test]
fn sfm_writes_images_and_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_images(&input, 3);
    let out = tmp.path().join("out");
    let run = sfm(&[
        "sfm",
        "--in",
        input.to_str().unwrap(),
        "--mode",
        "targeted",
        "--rc",
        "0.5",
        "--sd",
        "0.1",
        "--seed",
        "9",
        "--format",
        "png16",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for i in 0..3 {
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("img{i}.json"))).unwrap())
                .unwrap();
        assert_eq!(side["applied"], true);
        assert_eq!(side["spec"]["mode"], "targeted");
        let (ri, ro) = (
            side["spec"]["r_inner"].as_f64().unwrap(),
            side["spec"]["r_outer"].as_f64().unwrap(),
        );
        let rc = 0.5 * side["spec"]["r_max"].as_f64().unwrap();
        assert!(ri <= rc && rc <= ro);
        assert_eq!(
            load_image(&out.join(format!("img{i}.png"))).unwrap().dims(),
            (32, 24)
        );
    }

    // single file input, gate closed: output equals input up to png16 quantization
    let single = tmp.path().join("one");
    let file = input.join("img1.png");
    let run = sfm(&[
        "sfm",
        "--in",
        file.to_str().unwrap(),
        "--mode",
        "central",
        "--rate",
        "0",
        "--seed",
        "9",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    assert_eq!(
        fs::read(&file).unwrap(),
        fs::read(single.join("img1.png")).unwrap()
    );
}

#[test]
fn degrade_psd_and_snr() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_images(&input, 2);
    let out = tmp.path().join("lr");
    let run = sfm(&[
        "degrade",
        "--in",
        input.to_str().unwrap(),
        "--kernel",
        "gaussian:1.1",
        "--scale",
        "2",
        "--noise",
        "awgn-blind:0,55",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("img0.json")).unwrap()).unwrap();
    let sigma = side["noise_sigma"].as_f64().unwrap();
    assert!((0.0..=55.0).contains(&sigma));
    assert_eq!(load_image(&out.join("img0.png")).unwrap().dims(), (16, 12));

    let psd = tmp.path().join("psd.csv");
    let run = sfm(&[
        "psd",
        "--in",
        input.to_str().unwrap(),
        "--bins",
        "16",
        "--hann",
        "--out",
        psd.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    let rows = read_csv(&psd);
    assert_eq!(rows.len(), 17);
    assert!(rows[1..]
        .iter()
        .all(|r| r[5].parse::<f64>().unwrap() >= 0.0));

    let snr = tmp.path().join("snr.csv");
    let run = sfm(&[
        "snr",
        "--alpha",
        "2",
        "--sigma2",
        "3,10",
        "--out",
        snr.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    let rows = read_csv(&snr);
    assert_eq!(
        rows[0],
        ["r_center", "signal", "snr_sigma2_3", "snr_sigma2_10"]
    );
    assert_eq!(rows.len(), 65);
    for r in &rows[1..] {
        let (a, b): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((a / b - 10.0 / 3.0).abs() < 1e-12);
    }
}
