use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;

use limitfrac::cli::config::Config;
use limitfrac::cli::convergence::mms_ladder;
use limitfrac::cli::output::{probe, write_series_csv, write_vtk, SERIES_COLUMNS};
use limitfrac::cli::{execute, Report};
use limitfrac::constitutive::ModelParams;
use limitfrac::mesh::{Mesh, Rect, SlitSpec};

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

/// Minimal legacy-VTK reader: points, cells and named point arrays.
struct Vtk {
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    types: Vec<u8>,
    arrays: Vec<(String, Vec<f64>)>,
}

fn parse_vtk(text: &str) -> Vtk {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    lines.next();
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
    let mut words = lines.flat_map(str::split_whitespace).peekable();
    let mut word = |expect: Option<&str>| {
        let w = words.next().expect("truncated file");
        if let Some(e) = expect {
            assert_eq!(w, e);
        }
        w
    };
    let mut vtk = Vtk { points: vec![], cells: vec![], types: vec![], arrays: vec![] };
    word(Some("POINTS"));
    let np: usize = word(None).parse().unwrap();
    word(Some("double"));
    for _ in 0..np {
        vtk.points.push([0, 1, 2].map(|_| word(None).parse().unwrap()));
    }
    word(Some("CELLS"));
    let nc: usize = word(None).parse().unwrap();
    let total: usize = word(None).parse().unwrap();
    let mut count = 0;
    for _ in 0..nc {
        let k: usize = word(None).parse().unwrap();
        vtk.cells.push((0..k).map(|_| word(None).parse().unwrap()).collect());
        count += k + 1;
    }
    assert_eq!(count, total);
    word(Some("CELL_TYPES"));
    assert_eq!(word(None).parse::<usize>().unwrap(), nc);
    for _ in 0..nc {
        vtk.types.push(word(None).parse().unwrap());
    }
    drop(word);
    if words.peek().is_some() {
        let rest: Vec<&str> = words.collect();
        assert_eq!(rest[0], "POINT_DATA");
        assert_eq!(rest[1].parse::<usize>().unwrap(), np);
        let mut i = 2;
        while i < rest.len() {
            assert_eq!(rest[i], "SCALARS");
            assert_eq!(rest[i + 2..i + 6], ["double", "1", "LOOKUP_TABLE", "default"]);
            let values = rest[i + 6..i + 6 + np].iter().map(|v| v.parse().unwrap()).collect();
            vtk.arrays.push((rest[i + 1].to_string(), values));
            i += 6 + np;
        }
    }
    vtk
}

#[test]
fn vtk_of_a_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.vtk");
    let mesh = Mesh::unit_square(0);
    write_vtk(&mesh, &[], &path).unwrap();
    let v = parse_vtk(&fs::read_to_string(&path).unwrap());
    assert_eq!(v.points.len(), 4);
    assert_eq!(v.cells.len(), 1);
    let mut c = v.cells[0].clone();
    c.sort_unstable();
    assert_eq!(c, [0, 1, 2, 3]);
    assert_eq!(v.types, vec![9]);
    assert!(v.arrays.is_empty());
}

#[test]
fn vtk_round_trips_coordinates_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.vtk");
    let mesh = Mesh::unit_square(3)
        .refine_box(Rect::new([0.4, 0.4], [0.7, 0.6]), 2)
        .carve_slit(SlitSpec::new([0.5, 0.5], [1.0, 0.5]).unwrap())
        .unwrap();
    let a: Vec<f64> = mesh.nodes().iter().map(|p| p[0] * 1e-7 + p[1].sin()).collect();
    let b: Vec<f64> = (0..mesh.n_nodes()).map(|i| i as f64 / 3.0).collect();
    write_vtk(&mesh, &[("a", &a), ("b", &b)], &path).unwrap();
    let v = parse_vtk(&fs::read_to_string(&path).unwrap());
    assert_eq!(v.points.len(), mesh.n_nodes());
    for (p, q) in v.points.iter().zip(mesh.nodes()) {
        assert!((p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12 && p[2] == 0.0);
    }
    // Duplicated slit nodes are distinct points at the same location.
    let distinct: std::collections::BTreeSet<_> = v.points.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
    assert_eq!(v.points.len() - distinct.len(), mesh.duplicated_nodes());
    assert_eq!(v.cells.len(), mesh.n_cells());
    assert!(v.types.iter().all(|&t| t == 9));
    assert_eq!(v.arrays.len(), 2);
    assert_eq!(v.arrays[0].0, "a");
    for (x, y) in v.arrays[0].1.iter().zip(&a) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
    assert_eq!(v.arrays[1].1, b);
}

#[test]
fn csv_writers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series_csv(&[], &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), format!("{}\n", SERIES_COLUMNS.join(",")));
    assert_eq!(&SERIES_COLUMNS[..6], ["step", "time", "bulk_energy", "crack_energy", "tip_pos", "tip_speed"]);

    let mesh = Mesh::unit_square(3);
    let n = mesh.n_nodes();
    let rows = probe(&mesh, &vec![0.25; n], &vec![1.0; n], &ModelParams::default(), [0.0, 0.3], [1.0, 0.7], 17)
        .unwrap();
    assert_eq!(rows.len(), 17);
    assert!(rows.iter().all(|r| r[3] == 0.25 && r[4] == 1.0 && r[5] == 0.0 && r[9] == 0.0));
}

#[test]
fn lefm_ladder_rates_approach_two() {
    let p = ModelParams { mu: 0.01, alpha: 1.0, beta: 0.0, gc: 1.0, kappa: 0.0, xi: 1.0 };
    let rows = mms_ladder(&p, 6, 1e-7).unwrap();
    let dofs: Vec<usize> = rows.iter().map(|r| r.dofs).collect();
    assert_eq!(dofs, [9, 25, 81, 289, 1089, 4225]);
    assert_eq!(rows[0].rate, 0.0);
    let gaps: Vec<f64> = rows[1..].iter().map(|r| (r.rate - 2.0).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[gaps.len() - 1] < 1e-3);
}

fn config(text: &str, overrides: &[&str]) -> Config {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Config::parse_with_overrides(text, &o).unwrap()
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let cfg = config("run.example = ex3\nmodel.alpha = 0.5\nrun.n_steps = 2\nrun.output_every = 1\n", &[]);
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    execute(&cfg, dirs[0].path()).unwrap();
    execute(&cfg, dirs[1].path()).unwrap();
    let echo = fs::read_to_string(dirs[0].path().join("resolved.cfg")).unwrap();
    execute(&Config::parse(&echo).unwrap(), dirs[2].path()).unwrap();
    for f in ["resolved.cfg", "series.csv", "centerline.csv", "final.vtk", "step_0002.vtk"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(a, fs::read(d.path().join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn replaying_a_sweep_echo_runs_the_sweep() {
    let cfg = config("run.example = ex4\n", &[]);
    let again = Config::parse(&cfg.to_text()).unwrap();
    assert!(again.sweep);
    assert_eq!(limitfrac::cli::presets::sweep(&again).len(), 4);
    assert!(!config("run.example = ex4\nmodel.beta = 0\n", &[]).sweep);
}

#[test]
fn ex2_strain_at_a_fixed_point_decreases_with_beta() {
    let dir = tempfile::tempdir().unwrap();
    let report = execute(&config("run.example = ex2\n", &[]), dir.path()).unwrap();
    let Report::Cases(cases) = report else { panic!("expected cases") };
    let betas: Vec<f64> = cases.iter().map(|c| c.config.beta).collect();
    assert_eq!(betas, [1.0, 2.0, 5.0, 10.0, 25.0]);
    let mut last = f64::INFINITY;
    for c in &cases {
        let (header, rows) = read_csv(&dir.path().join(&c.label).join("centerline.csv"));
        let col = |n: &str| header.iter().position(|h| h == n).unwrap();
        // In front of the tip, a quarter of the way back to the left wall.
        let row = rows.iter().min_by(|a, b| (a[col("x")] - 0.375).abs().total_cmp(&(b[col("x")] - 0.375).abs())).unwrap();
        let e = row[col("eps13")].hypot(row[col("eps23")]);
        assert!(e < last, "beta {}: {e} !< {last}", c.config.beta);
        last = e;
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_limitfrac"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "run.example = ex2\nmodel.nope = 1\n").unwrap();
    let out = bin().arg("run").arg(&bad).env("LIMITFRAC_OUTDIR", dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = bin().args(["example", "ex2", "--set", "model.beta=-1"]).env("LIMITFRAC_OUTDIR", dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let mms = dir.path().join("mms");
    let out = bin().args(["mms", "--cycles", "3", "--beta", "0.2", "--alpha", "1"]).env("LIMITFRAC_OUTDIR", &mms).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = read_csv(&mms.join("convergence.csv"));
    assert_eq!(header[0], "dofs");
    assert_eq!(rows.len(), 3);
    assert!(mms.join("resolved.cfg").exists());

    let fail = dir.path().join("fail");
    let out = bin()
        .args(["example", "ex4", "--set", "model.alpha=1", "--set", "model.beta=0"])
        .args(["--set", "solver.max_staggered=1", "--set", "run.n_steps=2"])
        .env("LIMITFRAC_OUTDIR", &fail)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Partial results are flushed before the failure is reported.
    let (_, rows) = read_csv(&fail.join("series.csv"));
    assert!(rows.is_empty());
    assert!(fail.join("final.vtk").exists());
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        ex in 1usize..5,
        mu in finite(0.01, 20.0),
        alpha in finite(0.1, 2.0),
        beta in finite(0.0, 25.0),
        dt in finite(1e-4, 1.0),
        steps in 1usize..200,
        levels in 0u32..3,
        x0 in finite(0.0, 0.5),
    ) {
        let text = format!(
            "run.example = ex{ex}\nmodel.mu = {mu}\nmodel.alpha = {alpha}\nmodel.beta = {beta}\n\
             run.dt = {dt}\nrun.n_steps = {steps}\nmesh.refine_levels = {levels}\n\
             mesh.refine_box = {x0}, 0, 1, {x0}\n"
        );
        let c = Config::parse(&text).unwrap();
        let again = Config::parse(&c.to_text()).unwrap();
        prop_assert_eq!(again.to_text(), c.to_text());
        prop_assert_eq!(Config { explicit: Default::default(), ..again }, Config { explicit: Default::default(), ..c });
    }
}
