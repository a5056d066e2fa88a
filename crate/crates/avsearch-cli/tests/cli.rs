//! End-to-end checks of the avsearch binary: exit codes, CSV layout,
//! byte-determinism, and the saliency snapshot paths.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use avsearch::pnm::{read_pgm16, write_ppm};
use avsearch::raster::RgbImage;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avsearch"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn scenario(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_exits_zero_on_found_and_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "run",
        "--scenario",
        &scenario("mini5.txt"),
        "--method",
        "nosal",
        "--seed",
        "3",
        "--detection",
        "threshold",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,x,y,phi_deg,sim_time_s,detected"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,0.500000,0.500000,"), "{first}");
    assert!(csv.trim_end().lines().last().unwrap().ends_with(",true"));
}

#[test]
fn run_exits_two_on_budget_exhaustion() {
    // Seal the target into its own pocket so the search must time out.
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("sealed.txt");
    fs::write(
        &scen,
        "map 6 6\nbackground 128 128 128\n\
         obstacle 4 4\nobstacle 4 5\nobstacle 5 4\n\
         target 5 5 0.5 220 30 30\nrobot 0.5 0.5 0\n",
    )
    .unwrap();
    let cfg = dir.path().join("short.cfg");
    fs::write(&cfg, "[search]\nmax_actions 4\n").unwrap();
    let out = bin()
        .args([
            "run",
            "--scenario",
            scen.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--detection",
            "threshold",
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_exits_one_on_missing_file_and_bad_config() {
    let out = bin()
        .args(["run", "--scenario", "/nonexistent/nope.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[sensor]\nwobble 3\n").unwrap();
    let out = bin()
        .args([
            "run",
            "--scenario",
            &scenario("mini5.txt"),
            "--config",
            cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.cfg"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn run_rejects_bad_scenario_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("broken.txt");
    fs::write(&scen, "map 5 5\nwarp 1 2\n").unwrap();
    let out = bin()
        .args(["run", "--scenario", scen.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.txt"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn batch_row_counts_and_nosal_dash() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("batch");
    run_ok(&[
        "batch",
        "--scenario",
        &scenario("mini5.txt"),
        "--scenario",
        &scenario("open10.txt"),
        "--method",
        "nosal",
        "--method",
        "prior",
        "--trials",
        "3",
        "--seed",
        "7",
        "--detection",
        "threshold",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.trim_end().lines().collect();
    assert_eq!(rows[0], "scenario,method,seed,found,actions,sim_time_s");
    assert_eq!(rows.len(), 1 + 12, "2 scenarios x 2 methods x 3 trials");

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let srows: Vec<&str> = summary.trim_end().lines().collect();
    assert_eq!(srows.len(), 1 + 4);
    for line in &srows[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[1] == "nosal" {
            assert_eq!(fields[fields.len() - 2], "-");
            assert_eq!(fields[fields.len() - 1], "-");
        } else {
            assert_ne!(fields[fields.len() - 2], "-");
        }
    }
}

#[test]
fn batch_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        run_ok(&[
            "batch",
            "--scenario",
            &scenario("mini5.txt"),
            "--method",
            "nosal",
            "--method",
            "bu",
            "--trials",
            "2",
            "--seed",
            "99",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn heatmap_dump_writes_per_step_maps() {
    let dir = tempfile::tempdir().unwrap();
    let maps = dir.path().join("maps");
    run_ok(&[
        "run",
        "--scenario",
        &scenario("mini5.txt"),
        "--method",
        "bu",
        "--seed",
        "5",
        "--detection",
        "threshold",
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--dump-heatmaps",
        maps.to_str().unwrap(),
    ]);
    let names: Vec<String> = fs::read_dir(&maps)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    for kind in ["view.ppm", "belief.pgm", "inhibition.pgm", "saliency.pgm"] {
        assert!(
            names.iter().any(|n| n == &format!("step_0000_{kind}")),
            "missing step_0000_{kind} in {names:?}"
        );
    }
}

#[test]
fn saliency_uniform_image_bu_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("flat.ppm");
    let img = RgbImage::filled(64, 48, [128, 128, 128]);
    write_ppm(&img_path, &img).unwrap();
    let out_dir = dir.path().join("sal");
    run_ok(&[
        "saliency",
        "--image",
        img_path.to_str().unwrap(),
        "--method",
        "bu",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let (w, h, data) = read_pgm16(&out_dir.join("bu.pgm")).unwrap();
    assert_eq!((w, h), (64, 48));
    assert!(data.iter().all(|&v| v == 0), "uniform input must be silent");
}

#[test]
fn saliency_td_patch_peaks_on_patch() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("patch.ppm");
    let mut img = RgbImage::filled(64, 48, [90, 90, 90]);
    for y in 20..28 {
        for x in 30..38 {
            img.set(x, y, [220, 30, 30]);
        }
    }
    write_ppm(&img_path, &img).unwrap();
    let out_dir = dir.path().join("sal");
    run_ok(&[
        "saliency",
        "--image",
        img_path.to_str().unwrap(),
        "--method",
        "td",
        "--target-color",
        "220,30,30",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let (w, _h, data) = read_pgm16(&out_dir.join("td.pgm")).unwrap();
    let (best, _) = data
        .iter()
        .enumerate()
        .max_by_key(|(_, &v)| v)
        .unwrap();
    let (bx, by) = (best % w, best / w);
    assert!(
        (30..38).contains(&bx) && (20..28).contains(&by),
        "peak at ({bx}, {by}) outside the patch"
    );
}

#[test]
fn saliency_td_without_color_fails() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("img.ppm");
    write_ppm(&img_path, &RgbImage::filled(32, 32, [90, 90, 90])).unwrap();
    let out = bin()
        .args([
            "saliency",
            "--image",
            img_path.to_str().unwrap(),
            "--method",
            "td",
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("TD requires target color"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn shipped_scenarios_all_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut checked = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "txt") {
                let text = fs::read_to_string(&path).unwrap();
                avsearch::scene::load_scenario(&text)
                    .unwrap_or_else(|e| panic!("{} fails to parse: {e}", path.display()));
                checked += 1;
            }
        }
    }
    assert!(checked >= 23, "expected the shipped scenario set, saw {checked}");
}
