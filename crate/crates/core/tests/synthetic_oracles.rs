//! Planted cohort differences show up in the extracted features with the
//! expected sign, and absent differences do not.

use std::collections::BTreeMap;

use inkscreen::features::{extract_study, FeatureSet, FeatureTable, FeatureVector};
use inkscreen::ink_model::Cohort;
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::synthcohort::{generate_study, pathology_contrast, CohortProfile, Profiles, StudyRecipe};
use proptest::prelude::*;

fn recipe(n: usize, seed: u64, hc: CohortProfile, ad: CohortProfile) -> StudyRecipe {
    StudyRecipe {
        n_per_cohort: n,
        seed,
        tasks: vec![1, 2],
        profiles: Profiles { hc, ad },
        ..StudyRecipe::default()
    }
}

fn tables(r: &StudyRecipe) -> BTreeMap<FeatureSet, FeatureTable> {
    let (t, failures) = extract_study(&generate_study(r).unwrap(), &SmoothingConfig::default());
    assert!(failures.is_empty(), "{failures:?}");
    t
}

fn cohort_mean(rows: &[FeatureVector], cohort: Cohort, feature: &str) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.label == cohort).map(|r| r.get(feature).unwrap()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn jerk_gain_raises_normalized_jerk_in_every_seed() {
    let ad = CohortProfile {
        jerk_gain: 3.0,
        ..CohortProfile::default()
    };
    for seed in 0..20 {
        let t = tables(&recipe(5, seed, CohortProfile::default(), ad.clone()));
        let rows = &t[&FeatureSet::P].rows;
        let (hc, adm) = (
            cohort_mean(rows, Cohort::Hc, "P_normalized_jerk"),
            cohort_mean(rows, Cohort::Ad, "P_normalized_jerk"),
        );
        assert!(adm > hc, "seed {seed}: AD {adm} <= HC {hc}");
    }
}

#[test]
fn identical_profiles_give_small_contrasts() {
    let mut total = 0;
    let mut small = 0;
    for seed in 0..4 {
        let t = tables(&recipe(40, 100 + seed, CohortProfile::default(), CohortProfile::default()));
        let rows = &t[&FeatureSet::AL].rows;
        for name in &t[&FeatureSet::AL].names {
            if ["sex", "work", "age", "education"].contains(&name.as_str()) {
                continue;
            }
            let d = pathology_contrast(rows, name).unwrap();
            total += 1;
            if d.abs() < 0.5 {
                small += 1;
            }
        }
    }
    assert!(small * 100 >= total * 95, "{small}/{total} contrasts below 0.5");
}

#[test]
fn halved_speed_lowers_velocity() {
    let ad = CohortProfile {
        base_speed: 0.5,
        ..CohortProfile::default()
    };
    let t = tables(&recipe(15, 7, CohortProfile::default(), ad));
    for f in ["P_average_absolute_velocity", "P_peak_vertical_velocity"] {
        let d = pathology_contrast(&t[&FeatureSet::P].rows, f).unwrap();
        assert!(d < -1.0, "{f}: d = {d}");
    }
}

#[test]
fn in_air_only_changes_leave_on_paper_velocity_alone() {
    let ad = CohortProfile {
        air_speed_factor: 0.5,
        ..CohortProfile::default()
    };
    let t = tables(&recipe(20, 8, CohortProfile::default(), ad));
    let air = pathology_contrast(&t[&FeatureSet::A].rows, "A_average_absolute_velocity").unwrap();
    let paper = pathology_contrast(&t[&FeatureSet::P].rows, "P_average_absolute_velocity").unwrap();
    assert!(air < -1.0, "in-air d = {air}");
    assert!(paper.abs() < 0.8, "on-paper d = {paper}");
}

#[test]
fn tremor_alone_barely_moves_slant() {
    let ad = CohortProfile {
        tremor_amplitude: 3.0,
        ..CohortProfile::default()
    };
    let t = tables(&recipe(20, 9, CohortProfile::default(), ad));
    let d = pathology_contrast(&t[&FeatureSet::P].rows, "P_slant").unwrap();
    assert!(d.abs() < 0.5, "slant d = {d}");
}

#[test]
fn tremor_amplitude_raises_jerk_monotonically() {
    let means: Vec<[f64; 2]> = [0.0, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|amp| {
            let p = CohortProfile {
                tremor_amplitude: amp,
                ..CohortProfile::default()
            };
            let t = tables(&recipe(6, 11, p.clone(), p));
            [
                cohort_mean(&t[&FeatureSet::P].rows, Cohort::Hc, "P_absolute_jerk"),
                cohort_mean(&t[&FeatureSet::A].rows, Cohort::Hc, "A_absolute_jerk"),
            ]
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[1][0] >= w[0][0], "on-paper jerk fell: {means:?}");
    }
    // in air, a one-unit tremor is below the sensor noise floor
    for w in means[2..].windows(2) {
        assert!(w[1][1] >= w[0][1], "in-air jerk fell: {means:?}");
    }
    assert!(means[4][1] > means[0][1] * 1.2, "in-air jerk barely moved: {means:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_studies_have_full_dimension_and_finite_values(
        seed in 0u64..10_000,
        speed in 0.4f64..1.6,
        jerk in 1.0f64..4.0,
        tremor in 0.0f64..4.0,
    ) {
        let ad = CohortProfile { base_speed: speed, jerk_gain: jerk, tremor_amplitude: tremor, ..CohortProfile::default() };
        let t = tables(&recipe(1, seed, CohortProfile::default(), ad));
        for (set, table) in &t {
            prop_assert_eq!(table.rows.len(), 4);
            for v in &table.rows {
                prop_assert_eq!(v.values.len(), set.dimension());
                prop_assert!(v.values.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn recipe_round_trips_through_toml(seed in any::<u64>(), n in 1usize..200, spread in 0.0f64..0.5) {
        let r = StudyRecipe { seed, n_per_cohort: n, speed_spread: spread, ..StudyRecipe::default() };
        let back = StudyRecipe::from_toml(&r.to_toml()).unwrap();
        prop_assert_eq!(back.digest(), r.digest());
    }
}
