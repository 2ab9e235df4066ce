mod common;

fn check(result: common::Check) {
    if let Err(e) = result {
        panic!("{e}");
    }
}

#[test]
fn penalty_is_concave_with_plateau() {
    check(common::penalty_concavity_plateau());
}

#[test]
fn weights_are_monotone() {
    check(common::weight_monotonicity());
}

#[test]
fn group_extraction_matches_planted_partition() {
    check(common::extract_groups_partition_equivalence());
}

#[test]
fn fit_is_permutation_equivariant() {
    check(common::fit_permutation_equivariance());
}

#[test]
fn bic_grows_with_group_count() {
    check(common::bic_monotone_in_k());
}
