use edchrom::harness::{
    efficiency_sweep, l1_error, restrict_reference, trimmed_l1_error, ErrorVariable, DEFAULT_TRIM_FRACTION,
};
use edchrom::{experiment_preset, Field, SchemeKind};
use proptest::prelude::*;

proptest! {
    #[test]
    fn restriction_preserves_the_mean(
        ratio_pow in 0u32..5,
        m in 1usize..20,
        vals in prop::collection::vec(-5.0f64..5.0, 2 * 16 * 20),
    ) {
        let ratio = 1usize << ratio_pow;
        let fine = Field::from_cells(2, m * ratio, vals[..2 * m * ratio].to_vec()).unwrap();
        let coarse = restrict_reference(&fine, m).unwrap();
        for i in 0..2 {
            let a: f64 = fine.component(i).iter().sum::<f64>() / (m * ratio) as f64;
            let b: f64 = coarse.component(i).iter().sum::<f64>() / m as f64;
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn trimmed_error_is_bounded_by_the_full_error(
        a in prop::collection::vec(-1.0f64..1.0, 3 * 40),
        b in prop::collection::vec(-1.0f64..1.0, 3 * 40),
    ) {
        let x = Field::from_cells(3, 40, a).unwrap();
        let y = Field::from_cells(3, 40, b).unwrap();
        let full = l1_error(&x, &y).unwrap();
        let trimmed = trimmed_l1_error(&x, &y, DEFAULT_TRIM_FRACTION).unwrap();
        prop_assert!(full >= trimmed && trimmed >= 0.0);
    }
}

#[test]
fn first_order_scheme_error_decreases_with_refinement() {
    let preset = experiment_preset(4).unwrap();
    let reference = preset.clone().with_cells(3200).run().unwrap().final_snapshot().c.clone();
    let rows = efficiency_sweep(
        &[SchemeKind::CompUpw1],
        &[50, 100, 200, 400],
        &preset,
        ErrorVariable::Concentration,
        &reference,
    );
    let errors: Vec<f64> = rows.into_iter().map(|r| r.unwrap().e_m).collect();
    assert!(errors.windows(2).all(|e| e[1] < e[0]), "{errors:?}");
}

#[test]
fn characteristic_scheme_beats_first_order_on_the_displacement_train() {
    // Ordinal only: rankings, not absolute errors or timings.
    let preset = experiment_preset(1).unwrap().with_final_time(1.0);
    let reference = preset.clone().with_cells(3200).run().unwrap().final_snapshot().c.clone();
    let schemes = [SchemeKind::ChrUpw, SchemeKind::Muscl, SchemeKind::CompUpw1];
    let rows = efficiency_sweep(&schemes, &[400], &preset, ErrorVariable::Concentration, &reference);
    let e: Vec<f64> = rows.into_iter().map(|r| r.unwrap().e_m).collect();
    assert!(e[0] < e[1] && e[1] < e[2], "{e:?}");
}
