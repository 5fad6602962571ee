//! Ingestion properties: revision visibility under as-of filtering, row
//! membership, and time splits, checked by brute-force re-derivation.

mod support;

use mpf_core::panel::{
    build_design, split_by_time, PanelDataset, PanelRecord, PredictorSpec, TaskSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn record(loc: &str, time: i64, var: &str, value: f64, issue: Option<i64>) -> PanelRecord {
    PanelRecord {
        location: loc.into(),
        time,
        variable: var.into(),
        value,
        issue,
    }
}

/// Brute-force visibility rule: the value seen at `as_of` is the one with
/// the largest issue date not exceeding `as_of`.
fn visible_value(
    panel: &PanelDataset,
    loc: &str,
    time: i64,
    var: &str,
    as_of: Option<i64>,
) -> Option<f64> {
    panel
        .records
        .iter()
        .filter(|r| {
            r.location == loc
                && r.time == time
                && r.variable == var
                && as_of.is_none_or(|cut| r.effective_issue() <= cut)
        })
        .max_by_key(|r| r.effective_issue())
        .map(|r| r.value)
}

/// A panel with staggered revisions; designs built at increasing as-of
/// dates must follow the brute-force visibility rule cell by cell.
#[test]
fn as_of_filtering_matches_brute_force_visibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let locs = ["aa", "bb", "cc"];
    let times: Vec<i64> = (0..8).collect();
    let mut records = Vec::new();
    for loc in &locs {
        for &t in &times {
            // First release a few days after the event, then one revision.
            let first_issue = t + rng.random_range(0..3);
            let v0 = rng.random_range(-5.0..5.0);
            records.push(record(loc, t, "cases", v0, Some(first_issue)));
            if rng.random_range(0.0..1.0) < 0.6 {
                records.push(record(
                    loc,
                    t,
                    "cases",
                    v0 + rng.random_range(0.1..1.0),
                    Some(first_issue + rng.random_range(1..4)),
                ));
            }
        }
    }
    let panel = PanelDataset {
        records,
        dates: false,
    };

    for as_of in [2, 5, 9, 15] {
        let task = TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("cases", vec![0])],
            aheads: vec![0],
            forecast_times: times.clone(),
            as_of: Some(as_of),
        };
        let Ok(design) = build_design(&panel, &task) else {
            continue;
        };
        for (r, key) in design.row_index.iter().enumerate() {
            let expect = visible_value(&panel, &key.location, key.time, "cases", Some(as_of))
                .expect("row present implies a visible predictor value");
            assert_eq!(
                design.x.get(r, 0),
                expect,
                "as_of {as_of}: predictor for {}@{}",
                key.location,
                key.time
            );
            if design.w.get(r, 0) == 1.0 {
                assert_eq!(design.y.get(r, 0), expect, "response cell mismatch");
            }
        }
    }
}

/// Later as-of dates can only reveal more: every (location, time) row
/// present at an earlier as-of must still be present at a later one.
#[test]
fn visibility_grows_with_as_of() {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut records = Vec::new();
    for loc in ["p", "q"] {
        for t in 0..10i64 {
            records.push(record(
                loc,
                t,
                "flu",
                rng.random_range(0.0..9.0),
                Some(t + rng.random_range(0..4)),
            ));
        }
    }
    let panel = PanelDataset {
        records,
        dates: false,
    };
    let build = |as_of: i64| {
        let task = TaskSpec {
            response: "flu".into(),
            predictors: vec![PredictorSpec::new("flu", vec![0, 1])],
            aheads: vec![0, 1],
            forecast_times: (0..10).collect(),
            as_of: Some(as_of),
        };
        build_design(&panel, &task).ok()
    };
    let mut previous: Vec<(String, i64)> = Vec::new();
    for as_of in 0..15 {
        let Some(design) = build(as_of) else { continue };
        let current: Vec<(String, i64)> = design
            .row_index
            .iter()
            .map(|k| (k.location.clone(), k.time))
            .collect();
        for key in &previous {
            assert!(
                current.contains(key),
                "row {key:?} visible at as_of {} vanished at {as_of}",
                as_of - 1
            );
        }
        previous = current;
    }
}

/// Row membership: a (location, forecast-time) pair appears exactly when
/// every predictor lag is observed, and masked response cells carry w = 0.
#[test]
fn row_membership_matches_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let locs = ["x1", "x2", "x3", "x4"];
    let mut records = Vec::new();
    for loc in &locs {
        for t in 0..12i64 {
            // Drop ~25% of the observations entirely.
            if rng.random_range(0.0..1.0) < 0.75 {
                records.push(record(loc, t, "v", rng.random_range(-1.0..1.0), None));
            }
        }
    }
    let panel = PanelDataset {
        records,
        dates: false,
    };
    let lags = vec![0i64, 2];
    let aheads = vec![1i64, 3];
    let forecast_times: Vec<i64> = (2..9).collect();
    let task = TaskSpec {
        response: "v".into(),
        predictors: vec![PredictorSpec::new("v", lags.clone())],
        aheads: aheads.clone(),
        forecast_times: forecast_times.clone(),
        as_of: None,
    };
    let design = build_design(&panel, &task).unwrap();

    let has = |loc: &str, t: i64| {
        panel
            .records
            .iter()
            .any(|r| r.location == loc && r.time == t && r.variable == "v")
    };
    let mut expected = Vec::new();
    for &t in &forecast_times {
        let mut in_time: Vec<&str> = locs
            .iter()
            .copied()
            .filter(|loc| {
                let predictors_ok = lags.iter().all(|&l| has(loc, t - l));
                let any_response = aheads.iter().any(|&a| has(loc, t + a));
                predictors_ok && any_response
            })
            .collect();
        in_time.sort();
        for loc in in_time {
            expected.push((loc.to_string(), t));
        }
    }
    let got: Vec<(String, i64)> = design
        .row_index
        .iter()
        .map(|k| (k.location.clone(), k.time))
        .collect();
    assert_eq!(got, expected, "row membership or ordering differs");

    for (r, key) in design.row_index.iter().enumerate() {
        for (j, &a) in aheads.iter().enumerate() {
            let observed = has(&key.location, key.time + a);
            assert_eq!(
                design.w.get(r, j),
                if observed { 1.0 } else { 0.0 },
                "mask for {}@{} ahead {a}",
                key.location,
                key.time
            );
        }
    }
}

/// Splitting at a cutoff partitions rows by forecast time, preserving
/// order within each side.
#[test]
fn time_split_partitions_rows() {
    let mut records = Vec::new();
    for loc in ["l1", "l2", "l3"] {
        for t in 0..12i64 {
            records.push(record(loc, t, "z", (t as f64) + 0.5, None));
        }
    }
    let panel = PanelDataset {
        records,
        dates: false,
    };
    let task = TaskSpec {
        response: "z".into(),
        predictors: vec![PredictorSpec::new("z", vec![0])],
        aheads: vec![0, 1],
        forecast_times: (1..=10).collect(),
        as_of: None,
    };
    let design = build_design(&panel, &task).unwrap();
    assert_eq!(design.num_rows(), 30, "10 times x 3 locations");

    let (fit, cal) = split_by_time(&design, 7);
    assert_eq!(fit.num_rows(), 21, "times 1..=7 of 3 locations");
    assert_eq!(cal.num_rows(), 9, "times 8..=10 of 3 locations");
    assert!(fit.row_index.iter().all(|k| k.time <= 7));
    assert!(cal.row_index.iter().all(|k| k.time > 7));
    // Original ordering is preserved on both sides of the cut.
    let mut merged: Vec<&str> = Vec::new();
    let mut fit_iter = fit.row_index.iter().peekable();
    let mut cal_iter = cal.row_index.iter().peekable();
    for key in &design.row_index {
        if fit_iter.peek().is_some_and(|k| *k == key) {
            fit_iter.next();
            merged.push("fit");
        } else {
            assert_eq!(cal_iter.next().unwrap(), key);
            merged.push("cal");
        }
    }
    assert!(fit_iter.next().is_none() && cal_iter.next().is_none());
    assert!(merged.contains(&"fit") && merged.contains(&"cal"));
}
