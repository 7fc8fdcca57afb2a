//! Temporary diagnostic: decomposition of the on-curve error of the
//! approximant, plus a constant-data machinery check.

use harmtube_core::approximant::{Approximant, ApproximantOpts};
use harmtube_core::extension::{Extension, ExtensionOpts};
use harmtube_core::geometry::builtin_curve;
use harmtube_core::modulus::{builtin_boundary, BoundaryData, Modulus};
use harmtube_core::quadrature::{Cell, Exclusion, OctreeMesh, OctreeParams};
use harmtube_core::{Curve, DyadicCover, Point3};
use std::sync::Arc;

/// Resolved volume integral of the extension Laplacian over one cell:
/// split until the cell size is below an eighth of the curve distance
/// (where the finite-difference flux is trustworthy), then sum fluxes.
fn oracle_charge(ext: &Extension<f64>, curve: &Curve<f64>, cell: &Cell<f64>, floor: f64) -> f64 {
    let d = curve.dist(cell.center);
    if cell.size() <= (d / 8.0).max(floor) {
        return ext.flux_integral(cell.center, cell.half);
    }
    let h = cell.half * 0.5;
    let mut acc = 0.0;
    for i in 0..8 {
        let sx = if i & 1 == 0 { -h } else { h };
        let sy = if i & 2 == 0 { -h } else { h };
        let sz = if i & 4 == 0 { -h } else { h };
        let child = Cell::cube(
            Point3::new(cell.center.x + sx, cell.center.y + sy, cell.center.z + sz),
            h,
        );
        acc += oracle_charge(ext, curve, &child, floor);
    }
    acc
}

fn main() {
    let base = Arc::new(Curve::build(builtin_curve("segment").unwrap(), 1e-9).unwrap());
    let omega = Modulus::power(0.5);
    let opts = ApproximantOpts {
        c1: Some(14),
        ..ApproximantOpts::default()
    };

    println!("== constant data (machinery check) ==");
    for level in 3..=5usize {
        let cover = Arc::new(DyadicCover::new(base.clone(), level + 2).unwrap());
        let data = BoundaryData::new("one", |_p| 1.0f64);
        let ext = Arc::new(Extension::new(cover, data, ExtensionOpts::default()));
        let ap = Approximant::build(&ext, &omega, level, &opts).unwrap();
        let lam = ap.scale();
        let curve = ext.cover().curve().clone();
        let mut on_curve: f64 = 0.0;
        let mut shell: f64 = 0.0;
        for i in 0..=48 {
            let arc = 2.0 * i as f64 / 48.0;
            let p = curve.point_at_clamped(arc);
            on_curve = on_curve.max((ap.eval(p) - 1.0).abs());
            let q = Point3::new(p.x, lam, 0.0);
            shell = shell.max((ap.eval(q) - ext.eval_f0(q)).abs());
        }
        let st = ap.stats();
        println!(
            "level {level}: on-curve {on_curve:.3e}  shell(v-f0) {shell:.3e}  flux_mm {:.2e}  surf {}  cells {}",
            st.flux_mismatch, st.surface_samples, st.source_cells
        );
    }

    println!("== mass oracle (face-flux vs resolved volume, abs_sqrt) ==");
    for level in [3usize, 4] {
        let cover = Arc::new(DyadicCover::new(base.clone(), level + 2).unwrap());
        let data = builtin_boundary("abs_sqrt", 0.5).unwrap();
        let ext = Arc::new(Extension::new(cover, data, ExtensionOpts::default()));
        let ap = Approximant::build(&ext, &omega, level, &opts).unwrap();
        let curve = ext.cover().curve().clone();
        let lam_c = ext.cover().lambda(level - 2);
        let tube = 2.0 * lam_c;
        let floor = ext.cover().lambda(level + 2);
        let total = curve.total_length();
        let n_coarse = ext.cover().nodes(level - 2).len();
        let spacing_c = total / (n_coarse as f64 - 1.0);
        let root = Cell::enclosing(&curve.bbox().inflate(tube * 1.3));
        let max_depth = (root.size() / floor).log2().ceil() as u32;
        let params = OctreeParams {
            max_depth,
            max_cells: 4_000_000,
        };
        let refine = |c: &Cell<f64>| {
            let d = curve.dist(c.center);
            let mut target = 0.8 * d;
            if d > lam_c * 1.5 {
                target *= 0.125;
            }
            c.size() > target.max(floor)
        };
        let sqrt3 = 3.0f64.sqrt();
        let exclude = |c: &Cell<f64>| {
            if curve.dist(c.center) - sqrt3 * c.half > tube {
                Exclusion::Inside
            } else {
                Exclusion::Outside
            }
        };
        let mesh = OctreeMesh::build(root, &params, &refine, &exclude).unwrap();
        let mut vol_masses = vec![0.0f64; n_coarse];
        let oracle_floor = floor / 2.0;
        for cell in mesh.leaves() {
            let near = curve.nearest(cell.center);
            if near.dist <= tube {
                let k = ((near.arc / spacing_c).round().max(0.0) as usize).min(n_coarse - 1);
                vol_masses[k] += oracle_charge(&ext, &curve, cell, oracle_floor);
            }
        }
        println!("level {level} ({} nodes):", n_coarse);
        for k in 0..n_coarse {
            println!(
                "  node {k}: face {:+.4}  volume {:+.4}  diff {:+.4}",
                ap.masses()[k],
                vol_masses[k],
                ap.masses()[k] - vol_masses[k]
            );
        }

        // face-route Richardson: halve every cell target
        let fine = Approximant::build(
            &ext,
            &omega,
            level,
            &ApproximantOpts {
                c1: Some(14),
                theta_mass: 0.4,
                ..ApproximantOpts::default()
            },
        )
        .unwrap();
        let sums = |m: &[f64]| m.iter().sum::<f64>();
        println!(
            "  totals: face {:+.4}  face(theta/2) {:+.4}  volume {:+.4}",
            sums(ap.masses()),
            sums(fine.masses()),
            sums(&vol_masses)
        );
        for k in 0..n_coarse {
            println!(
                "  node {k} theta/2: face {:+.4}  (coarse {:+.4})",
                fine.masses()[k],
                ap.masses()[k]
            );
        }

        // oracle shell decomposition and floor convergence
        for of in [floor / 2.0, floor / 4.0] {
            let mut shells = [0.0f64; 4];
            for cell in mesh.leaves() {
                let near = curve.nearest(cell.center);
                if near.dist <= tube {
                    let q = oracle_charge(&ext, &curve, cell, of);
                    let bin = if near.dist < 0.125 * tube {
                        0
                    } else if near.dist < 0.25 * tube {
                        1
                    } else if near.dist < 0.5 * tube {
                        2
                    } else {
                        3
                    };
                    shells[bin] += q;
                }
            }
            println!(
                "  oracle floor {of:.4}: shells(d/tube: <1/8, <1/4, <1/2, rest) {:+.3} {:+.3} {:+.3} {:+.3}  total {:+.3}",
                shells[0], shells[1], shells[2], shells[3],
                shells[0] + shells[1] + shells[2] + shells[3]
            );
        }
    }

    println!("== abs_sqrt data ==");
    for level in 3..=6usize {
        let cover = Arc::new(DyadicCover::new(base.clone(), level + 2).unwrap());
        let data = builtin_boundary("abs_sqrt", 0.5).unwrap();
        let ext = Arc::new(Extension::new(cover, data, ExtensionOpts::default()));
        let ap = Approximant::build(&ext, &omega, level, &opts).unwrap();
        let lam = ap.scale();
        let ow = omega.eval(lam);
        let curve = ext.cover().curve().clone();
        let mut worst: f64 = 0.0;
        let mut worst_arc = 0.0;
        let mut floor: f64 = 0.0;
        let mut shell: f64 = 0.0;
        for i in 0..=96 {
            let arc = 2.0 * i as f64 / 96.0;
            let p = curve.point_at_clamped(arc);
            let f = p.x.abs().sqrt();
            let e = (ap.eval(p) - f).abs();
            if e > worst {
                worst = e;
                worst_arc = arc;
            }
            floor = floor.max((ext.eval_f0(p) - f).abs());
            let q = Point3::new(p.x, lam, 0.0);
            shell = shell.max((ap.eval(q) - ext.eval_f0(q)).abs());
        }
        let st = ap.stats();
        println!(
            "level {level}: sup|v-f| {worst:.4}  (/omega {:.2}, argmax arc {worst_arc:.3})  f0-floor {floor:.4}  shell(v-f0) {shell:.4}  maxmass {:.1}  flux_mm {:.2e}",
            worst / ow, st.max_normalized_mass, st.flux_mismatch
        );
        // error profile: left half vs right half, coarse sampling
        let mut profile = String::new();
        for i in 0..=16 {
            let arc = 2.0 * i as f64 / 16.0;
            let p = curve.point_at_clamped(arc);
            let f = p.x.abs().sqrt();
            profile.push_str(&format!("{:+.2} ", (ap.eval(p) - f) / ow));
        }
        println!("  profile(/omega): {profile}");
    }
}
