use std::sync::Arc;

use ptpinn::metrics::{make_test_set, TEST_SET_SIZE};
use ptpinn::problems::{ac_reference_oracle, make_allen_cahn_with, AcOracleSettings};

/// Refining the default oracle grid by 2x in both directions barely moves
/// the interpolated test references.
#[test]
fn grid_refinement_changes_test_references_little() {
    let base = AcOracleSettings::default();
    let coarse = ac_reference_oracle(base).unwrap();
    let fine = ac_reference_oracle(AcOracleSettings::new(2 * base.nx, 2 * base.nt - 1)).unwrap();
    let a = make_test_set(&make_allen_cahn_with(Arc::new(coarse.grid)), TEST_SET_SIZE, 17).unwrap();
    let b = make_test_set(&make_allen_cahn_with(Arc::new(fine.grid)), TEST_SET_SIZE, 17).unwrap();
    assert_eq!(a.points, b.points);
    let worst = a
        .reference
        .iter()
        .zip(&b.reference)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    eprintln!("max change under refinement: {worst:e}");
    assert!(worst < 1e-4, "max change {worst:e}");
}
