//! Property tests for the forward model: quadrature consistency,
//! translation invariance, monotone decay, and kernel symmetry.

use gravicont::{
    apply_forward, assemble_matrix, kernel_vertical, synth_field, ContinuationGrid, LayerDensity,
    ObservationSet, PointSource, Rect,
};
use nalgebra::Point3;
use proptest::prelude::*;
use std::sync::Arc;

fn coord() -> impl Strategy<Value = f64> {
    (-10_000i64..10_000).prop_map(|v| v as f64 / 10_000.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // A layer with all its mass at one node is a point source there.
    #[test]
    fn concentrated_layer_equals_point_source(
        node in 0usize..36,
        mass in 1u32..500,
        h in 1u32..20,
    ) {
        let extent = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let depth = h as f64 * 0.05;
        let mass = mass as f64 / 100.0;
        let obs = ObservationSet::regular_grid(extent, 5, 5, 0.0).unwrap();
        let grid = Arc::new(ContinuationGrid::new(extent, 5, 5, depth).unwrap());
        let a = assemble_matrix(&obs, &grid, 1.0).unwrap();

        let mut phi = vec![0.0; grid.node_count()];
        phi[node] = mass / grid.cell_areas()[node];
        let density = LayerDensity::new(grid.clone(), phi).unwrap();
        let via_layer = apply_forward(&a, &density).unwrap();

        let source = vec![PointSource::new(mass, grid.nodes()[node]).unwrap()];
        let direct = synth_field(&source, obs.points(), 1.0).unwrap();
        for (l, d) in via_layer.iter().zip(&direct) {
            prop_assert!((l - d).abs() <= 1e-12 * d.abs().max(1.0), "{l} vs {d}");
        }
    }

    // Shifting sources and observation points together changes nothing.
    #[test]
    fn translation_invariance(
        sx in coord(), sy in coord(),
        px in coord(), py in coord(),
        tx in coord(), ty in coord(),
        mass in 1u32..400,
        depth in 1u32..30,
    ) {
        let mass = mass as f64 / 100.0;
        let depth = -(depth as f64) / 20.0;
        let base = synth_field(
            &[PointSource::new(mass, Point3::new(sx, sy, depth)).unwrap()],
            &[Point3::new(px, py, 0.0)],
            1.0,
        ).unwrap();
        let shifted = synth_field(
            &[PointSource::new(mass, Point3::new(sx + tx, sy + ty, depth)).unwrap()],
            &[Point3::new(px + tx, py + ty, 0.0)],
            1.0,
        ).unwrap();
        prop_assert!((base[0] - shifted[0]).abs() <= 1e-12 * base[0].abs().max(1e-30),
            "{} vs {}", base[0], shifted[0]);
    }

    // The vertical kernel is odd under swapping the vertical coordinates.
    #[test]
    fn vertical_kernel_odd_symmetry(
        x1 in coord(), x2 in coord(), z_hi in 1u32..40,
        y1 in coord(), y2 in coord(), z_lo in 1u32..40,
    ) {
        let (zx, zy) = (z_hi as f64 / 20.0, -(z_lo as f64) / 20.0);
        let a = kernel_vertical(&Point3::new(x1, x2, zx), &Point3::new(y1, y2, zy), 1.0).unwrap();
        let b = kernel_vertical(&Point3::new(x1, x2, zy), &Point3::new(y1, y2, zx), 1.0).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1e-30), "{a} vs {b}");
    }
}

#[test]
fn field_decays_along_horizontal_ray() {
    let source = vec![PointSource::new(0.7, Point3::new(0.1, -0.2, -0.35)).unwrap()];
    let points: Vec<Point3<f64>> = (0..50)
        .map(|i| Point3::new(0.1 + 0.04 * i as f64, -0.2, 0.0))
        .collect();
    let values = synth_field(&source, &points, 1.0).unwrap();
    for pair in values.windows(2) {
        assert!(
            pair[1].abs() < pair[0].abs(),
            "field must decay away from the epicenter: {pair:?}"
        );
    }
}

#[test]
fn on_axis_field_is_inverse_square() {
    for h in [0.1, 0.25, 0.5, 1.0] {
        let m = 0.3;
        let source = vec![PointSource::new(m, Point3::new(0.0, 0.0, -h)).unwrap()];
        let value = synth_field(&source, &[Point3::new(0.0, 0.0, 0.0)], 1.0).unwrap()[0];
        let expected = m / (h * h);
        assert!(
            (value - expected).abs() <= 1e-12 * expected,
            "h={h}: {value} vs {expected}"
        );
    }
}
