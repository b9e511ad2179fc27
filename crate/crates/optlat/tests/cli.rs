use std::path::Path;
use std::process::{Command, Output};

use optlat::dataset::Dataset;
use optlat::manifest::sha256_hex;
use optlat::plot::{emit_plot, PlotError, PlotStyle};
use optlat::{parse_config, run_scenario, RunOptions};
use serde_json::Value;

fn optlat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optlat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("OPTLAT_OUT")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_FIG2: &str = "\
scenario = fig2
lattice.wavelength_nm = 532
lattice.species = sodium
thermal.atoms = 1e6
thermal.trap_hz = 75
sweep.temperatures_tr = 0.16
sweep.depths = 0, 4.9
sweep.times_ms = 0:400:40
";

#[test]
fn bands_outputs_match_their_checksums_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = optlat(&["bands", "--svg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["errors"].as_array().unwrap().len(), 0);
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = std::fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], sha256_hex(&bytes).as_str());
        assert_eq!(o["bytes"], bytes.len());
    }
    let csv = std::fs::read(dir.path().join("bands.csv")).unwrap();
    let data = Dataset::from_csv("bands", &csv).unwrap();
    assert_eq!(data.headers, ["s", "band", "q", "E_over_ER", "v_over_vR"]);
    assert_eq!(data.to_csv().unwrap(), csv);
    let svg = std::fs::read_to_string(dir.path().join("bands.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<metadata>"));
    // no temporary files survive the atomic writes
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn empty_sweep_succeeds_with_no_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.conf");
    std::fs::write(&cfg, SMALL_FIG2.replace("0, 4.9", "")).unwrap();
    let out = optlat(&["fig2", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert!(out.status.success());
    let m = manifest(&dir.path().join("o"));
    assert_eq!(m["outputs"].as_array().unwrap().len(), 0);
    assert_eq!(m["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, SMALL_FIG2.replace("0, 4.9", "-1, 4.9").replace("trap_hz = 75", "trap_hz = fast")).unwrap();
    let out = optlat(&["fig2", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("line 7"), "{err}");
    assert!(err.contains("sweep.depths"));
    assert!(!dir.path().join("o").exists());

    // a valid config for another scenario is refused too
    let out = optlat(&["fig1", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_errors_are_recorded_and_fail_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.conf");
    let text = optlat::defaults::default_config(optlat::ScenarioKind::Gpe).replace("gpe.box_um = 33.9", "gpe.box_um = 3");
    std::fs::write(&cfg, text).unwrap();
    let out = optlat(&["gpe", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&dir.path().join("o"));
    let errors = m["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert!(errors[0].as_str().unwrap().contains("Thomas-Fermi"));
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_optlat"))
        .arg("bands")
        .env("OPTLAT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("bands.csv").exists());
}

#[test]
fn builtin_configs_print_and_parse() {
    for kind in optlat::ScenarioKind::ALL {
        let out = Command::new(env!("CARGO_BIN_EXE_optlat")).args(["config", kind.name()]).output().unwrap();
        assert!(out.status.success());
        let sc = parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(sc.kind, kind);
    }
}

#[test]
fn csv_bytes_do_not_depend_on_thread_count() {
    let sc = parse_config(SMALL_FIG2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: usize| {
        let out_dir = dir.path().join(threads.to_string());
        let m = run_scenario(&sc, &RunOptions { out_dir: out_dir.clone(), threads, svg: false, config_text: SMALL_FIG2.to_string() });
        assert!(m.succeeded(), "{:?}", m.errors);
        std::fs::read(out_dir.join("rates.csv")).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    let rates = Dataset::from_csv("rates", &one).unwrap();
    let r = rates.numeric("rate_mm_s").unwrap();
    assert!((r[0] - 13.05).abs() < 0.005 * 13.05);
    assert!(r[1] < r[0]);
}

#[test]
fn profile_plot_overlays_one_line_per_time() {
    let mut d = Dataset::new("profiles", &["t_ms", "z_um", "density_per_um"]);
    for t in [0.0, 100.0, 200.0] {
        for i in -20..=20 {
            let z = i as f64 * 10.0;
            let w = 30.0 + t / 5.0;
            d.push(vec![t.into(), z.into(), (1e4 / w * (-z * z / (2.0 * w * w)).exp()).into()]);
        }
    }
    let svg = emit_plot(&d, &PlotStyle::PROFILES, "fig3a").unwrap();
    assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 3);
    assert!(svg.contains("t_ms=100.0") && svg.contains("[µm]") && svg.contains("fig3a"));
    let empty = Dataset::new("profiles", &["t_ms", "z_um", "density_per_um"]);
    assert!(matches!(emit_plot(&empty, &PlotStyle::PROFILES, "fig3a"), Err(PlotError::Empty(_))));
}
