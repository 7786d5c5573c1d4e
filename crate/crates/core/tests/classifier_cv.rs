use qep_core::question_processor::{cross_validate, TrainingSet, DEFAULT_ALPHA};

#[test]
fn stratified_five_fold_accuracy() {
    let acc = cross_validate(&TrainingSet::shipped(), 5, DEFAULT_ALPHA).unwrap();
    println!("5-fold accuracy {acc:.4}");
    assert!(acc >= 0.85, "accuracy {acc}");
}
