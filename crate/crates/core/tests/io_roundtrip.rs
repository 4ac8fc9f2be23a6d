//! Output formats read back by independent parsers.

use std::collections::HashMap;

use penfv::diagnostics::run_with_reports;
use penfv::geometry::FluidShape;
use penfv::io::{parse_config, write_diagnostics_csv, write_snapshot, RunConfig, CSV_COLUMNS};
use penfv::mesh::{split_domain, DomainMask, Grid};
use penfv::problem::{BoundarySpec, InitialSpec, Problem};
use penfv::scheme::{SchemeParams, State};
use penfv::Error;

/// Minimal legacy VTK reader for `STRUCTURED_POINTS` cell data.
#[derive(Debug, Default)]
struct VtkData {
    dimensions: Vec<usize>,
    spacing: Vec<f64>,
    cells: usize,
    scalars: HashMap<String, Vec<f64>>,
    vectors: HashMap<String, Vec<[f64; 3]>>,
}

fn read_vtk(text: &str) -> VtkData {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# vtk DataFile"));
    lines.next().unwrap();
    assert_eq!(lines.next().unwrap(), "ASCII");
    let mut out = VtkData::default();
    while let Some(line) = lines.next() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first().copied() {
            Some("DATASET") => assert_eq!(words[1], "STRUCTURED_POINTS"),
            Some("DIMENSIONS") => out.dimensions = words[1..].iter().map(|w| w.parse().unwrap()).collect(),
            Some("SPACING") => out.spacing = words[1..].iter().map(|w| w.parse().unwrap()).collect(),
            Some("ORIGIN") => assert!(words[1..].iter().all(|w| w.parse::<f64>().unwrap() == 0.0)),
            Some("CELL_DATA") => out.cells = words[1].parse().unwrap(),
            Some("SCALARS") => {
                assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
                let v = (0..out.cells).map(|_| lines.next().unwrap().trim().parse().unwrap()).collect();
                out.scalars.insert(words[1].to_string(), v);
            }
            Some("VECTORS") => {
                let v = (0..out.cells)
                    .map(|_| {
                        let c: Vec<f64> = lines.next().unwrap().split_whitespace().map(|w| w.parse().unwrap()).collect();
                        [c[0], c[1], c[2]]
                    })
                    .collect();
                out.vectors.insert(words[1].to_string(), v);
            }
            None => {}
            Some(other) => panic!("unexpected section {other}"),
        }
    }
    out
}

fn sample(dim: usize, n: usize) -> (State<f64>, DomainMask) {
    let grid = Grid::<f64>::new(dim, n, 1.0).unwrap();
    let center = [0.5, 0.5, if dim == 3 { 0.5 } else { 0.0 }];
    let init = InitialSpec { preset: "smooth-random".into(), amplitude: 0.3, ..InitialSpec::default() };
    let problem = Problem::new(FluidShape::ball(dim, center, 0.25), &init, &BoundarySpec::default(), 1.0, 5).unwrap();
    let mask = split_domain(&grid, problem.shape()).unwrap();
    (problem.initial_state(&grid).unwrap(), mask)
}

#[test]
fn vtk_snapshot_reads_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for (dim, n) in [(2, 8), (3, 8)] {
        let (s, mask) = sample(dim, n);
        let path = dir.path().join(format!("s{dim}.vtk"));
        write_snapshot(&s, &mask, &path).unwrap();
        let v = read_vtk(&std::fs::read_to_string(&path).unwrap());
        let expected_dims: Vec<usize> = (0..3).map(|a| if a < dim { n + 1 } else { 1 }).collect();
        assert_eq!(v.dimensions, expected_dims);
        assert_eq!(v.spacing, vec![1.0 / n as f64; 3]);
        let g = s.grid();
        assert_eq!(v.cells, g.num_cells());
        for k in 0..g.num_cells() {
            assert_eq!(v.scalars["rho"][k], s.rho.at(k));
            assert_eq!(v.scalars["theta"][k], s.theta.at(k));
            assert_eq!(v.scalars["mask"][k], if mask.is_solid(k) { 1.0 } else { 0.0 });
            for j in 0..3 {
                let u = if j < dim { s.u.get(k, j) } else { 0.0 };
                assert_eq!(v.vectors["u"][k][j], u);
            }
        }
    }
}

fn csv_bytes() -> Vec<u8> {
    let (s, mask) = sample(2, 8);
    let grid = *s.grid();
    let bd = penfv::scheme::BoundaryData::constant(&grid, 1.0, 1.0).unwrap();
    let h2 = grid.h() * grid.h();
    let run = run_with_reports(&s, &SchemeParams::with_steps(h2, h2), &mask, &bd, 4, |_, _| Ok(())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diagnostics.csv");
    write_diagnostics_csv(&run.reports, &path).unwrap();
    std::fs::read(&path).unwrap()
}

#[test]
fn diagnostics_csv_is_deterministic_and_well_formed() {
    let (a, b) = (csv_bytes(), csv_bytes());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, CSV_COLUMNS);
    assert_eq!(header.len(), 25);
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 25);
        assert_eq!(r[0], (i + 1) as f64);
    }
}

#[test]
fn config_file_errors_are_collected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[physics]\ngamma = 1.0\n[scheme]\nalpha = -1.5\n").unwrap();
    match parse_config(&path) {
        Err(Error::Config(msgs)) => {
            assert!(msgs.iter().any(|m| m.contains("γ must exceed 1")), "{msgs:?}");
            assert!(msgs.iter().any(|m| m.contains("α > −1")), "{msgs:?}");
        }
        other => panic!("expected a configuration error, got {other:?}"),
    }
    std::fs::write(&path, "seed = 1\n\n[grid]\nn = = 3\n").unwrap();
    match parse_config(&path) {
        Err(Error::Config(msgs)) => assert!(msgs[0].starts_with("line 4"), "{msgs:?}"),
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn written_config_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let cfg = RunConfig { seed: 9, ..RunConfig::default() };
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    assert_eq!(parse_config(&path).unwrap(), cfg);
}
