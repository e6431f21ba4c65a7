use crossflux::ModelParams;
use crossflux::spectral::{critical_d2, kernel_ratios, limiting_critical_d2, mode_block, FluxRatio};

const RAY: [f64; 5] = [1.0, 2.5, 5.0, 10.0, 25.0];

#[test]
fn critical_values_annihilate_the_mode_determinant() {
    for s in RAY {
        let p = ModelParams::reference(2.0 * s, s, 0.03).unwrap();
        for j in 1..=5 {
            if let Some(d) = critical_d2(j, &p) {
                let m = mode_block(j, d, &p);
                assert!(m.det.abs() <= 1e-12 * m.det_scale(), "s={s} j={j} det={}", m.det);
            }
        }
    }
}

#[test]
fn reference_table_at_two_one() {
    let p = ModelParams::reference(2.0, 1.0, 0.03).unwrap();
    let expect = [0.035565, 0.009664, 0.003407];
    for (j, e) in (1..=3).zip(expect) {
        let d = critical_d2(j, &p).unwrap();
        assert!((d - e).abs() / e < 2e-4, "j={j} d={d}");
    }
    let (kappa, _) = kernel_ratios(1, &p);
    assert!((kappa - 1.09563).abs() < 1e-5, "kappa={kappa}");
}

#[test]
fn onset_gap_shrinks_along_the_ray() {
    let p = ModelParams::reference(2.0, 1.0, 0.03).unwrap();
    let limit = limiting_critical_d2(1, &p, FluxRatio::Finite(2.0)).unwrap().unwrap();
    assert!((limit - 0.0486606).abs() < 1e-6);
    let gaps: Vec<f64> = RAY
        .iter()
        .map(|&s| {
            let p = ModelParams::reference(2.0 * s, s, 0.03).unwrap();
            (critical_d2(1, &p).unwrap() - limit).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!((gaps[4] - 6.3e-4).abs() < 0.05e-4, "{}", gaps[4]);
}

#[test]
fn limit_onsets_at_gamma_two() {
    let p = ModelParams::reference(2.0, 1.0, 0.03).unwrap();
    let expect = [0.04866, 0.01067, 0.00363];
    for (j, e) in (1..=3).zip(expect) {
        let d = limiting_critical_d2(j, &p, FluxRatio::Finite(2.0)).unwrap().unwrap();
        assert!((d - e).abs() / e < 2e-3, "j={j} d={d}");
    }
    assert!(limiting_critical_d2(1, &p, FluxRatio::Finite(0.5)).is_err());
}
