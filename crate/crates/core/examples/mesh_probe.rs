// scratch probe: baseline vs with-MIV leak/on currents for trend calibration
use mivkoz_core::mesh::{assign_doping, generate_mesh, RefinementPolicy};
use mivkoz_core::process::*;
use mivkoz_core::solver::{Device, SolverOptions};
use std::time::Instant;

fn scale_cm(g: &DeviceGeometry, o: Orientation) -> f64 {
    match o {
        Orientation::Vertical => g.src_depth * 1e-7,
        Orientation::Horizontal => g.width * 1e-7,
    }
}

fn metrics(corner: &ProcessCorner, scenario: &PlacementScenario) -> (f64, f64) {
    let g = DeviceGeometry::default();
    let layout = build_layout(&g, corner, scenario).unwrap();
    let dims = layout.natural_dims();
    let t0 = Instant::now();
    let mesh = generate_mesh(&layout, &RefinementPolicy::default(), dims).unwrap();
    let doping = assign_doping(&layout, &mesh);
    let device = Device::new(&mesh, &doping, SolverOptions::default()).unwrap();
    let (curve, err) =
        device.id_vg_sweep(1.0, &[0.0, 1.0], scale_cm(&g, scenario.orientation));
    if let Some(e) = err {
        eprintln!("  !! {e}");
    }
    eprintln!(
        "    [{} cells, {:.1} s]",
        mesh.num_cells(),
        t0.elapsed().as_secs_f64()
    );
    (curve.points[0].i_d, curve.points[1].i_d)
}

fn report(label: &str, corner: &ProcessCorner, scenario: &PlacementScenario, base: (f64, f64)) {
    let (leak, on) = metrics(corner, scenario);
    eprintln!(
        "{label}: leak {leak:.4e} A (x{:.4e})  on {on:.4e} A (x{:.4})",
        leak / base.0,
        on / base.1
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("dsep");
    let nominal = ProcessCorner::default();
    let vert = PlacementScenario::default();
    let horiz = PlacementScenario {
        orientation: Orientation::Horizontal,
        ..PlacementScenario::default()
    };
    match what {
        "dsep" => {
            let base = metrics(&nominal, &vert.baseline());
            eprintln!(
                "baseline: leak {:.4e} A  on {:.4e} A  (on/off {:.3e})",
                base.0,
                base.1,
                base.1 / base.0
            );
            for d_sep in [20.0, 50.0, 100.0] {
                let sc = PlacementScenario { d_sep, ..vert };
                report(&format!("d_sep {d_sep:5.0}"), &nominal, &sc, base);
            }
        }
        "tmiv" => {
            for t_miv in [20.0, 50.0, 100.0] {
                let c = ProcessCorner { t_miv, ..nominal };
                let base = metrics(&c, &vert.baseline());
                report(&format!("t_miv {t_miv:5.0}"), &c, &vert, base);
            }
        }
        "tox" => {
            for t_ox in [0.25, 1.0, 2.0] {
                let c = ProcessCorner { t_ox, ..nominal };
                let base = metrics(&c, &vert.baseline());
                report(&format!("t_ox {t_ox:5.2}"), &c, &vert, base);
            }
        }
        "nsub" => {
            for n_sub in [1e16, 1e17] {
                let c = ProcessCorner { n_sub, ..nominal };
                let base = metrics(&c, &vert.baseline());
                eprintln!("n_sub {n_sub:.0e}: baseline leak {:.4e} on {:.4e}", base.0, base.1);
                report(&format!("n_sub {n_sub:.0e}"), &c, &vert, base);
            }
        }
        "horiz" => {
            let base = metrics(&nominal, &horiz.baseline());
            eprintln!(
                "h-baseline: leak {:.4e} A  on {:.4e} A  (on/off {:.3e})",
                base.0,
                base.1,
                base.1 / base.0
            );
            for d_sep in [20.0, 50.0, 100.0] {
                let sc = PlacementScenario { d_sep, ..horiz };
                report(&format!("h d_sep {d_sep:5.0}"), &nominal, &sc, base);
            }
        }
        "offset" => {
            let base = metrics(&nominal, &vert.baseline());
            for d_offset in [-50.0, 0.0, 50.0] {
                let sc = PlacementScenario { d_offset, ..vert };
                report(&format!("d_off {d_offset:5.0}"), &nominal, &sc, base);
            }
        }
        other => eprintln!("unknown probe '{other}'"),
    }
}
