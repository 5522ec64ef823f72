// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contest scoring.
//!
//! A build-it team's score is its ship score (correctness and performance
//! tests) plus a non-positive resilience score (one penalty per unique defect
//! found against it). A break-it team earns the penalty value of every defect
//! it found, and shares that value with the other teams that found the same
//! defect once fixes have tied reports together.
//!
//! Penalties and break shares are exact rationals so that shares of a defect
//! always sum back to its penalty.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Exact score quantity.
pub type Points = Ratio<i64>;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.into())
            }
        }
    };
}

string_id!(
    /// A registered team.
    TeamId
);
string_id!(
    /// A break report.
    ReportId
);
string_id!(
    /// A fix submission.
    FixId
);

/// Kind of defect a break report demonstrates.
///
/// The declaration order is the severity order used when a fix ties
/// reports of different categories together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugCategory {
    Correctness,
    Crash,
    Integrity,
    Privacy,
}

impl BugCategory {
    pub const ALL: [BugCategory; 4] = [
        BugCategory::Correctness,
        BugCategory::Crash,
        BugCategory::Integrity,
        BugCategory::Privacy,
    ];

    pub fn is_security(self) -> bool {
        matches!(self, BugCategory::Integrity | BugCategory::Privacy)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BugCategory::Correctness => "correctness",
            BugCategory::Crash => "crash",
            BugCategory::Integrity => "integrity",
            BugCategory::Privacy => "privacy",
        }
    }

    /// Severity rank; privacy and integrity share the top tier.
    fn severity(self) -> u8 {
        match self {
            BugCategory::Correctness => 0,
            BugCategory::Crash => 1,
            BugCategory::Integrity | BugCategory::Privacy => 2,
        }
    }
}

impl fmt::Display for BugCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("multiplier must be positive")]
    ZeroMultiplier,
    #[error("per-target report limit must be at least 1")]
    ZeroReportLimit,
    #[error("performance metric {0} is not a finite non-negative number")]
    BadMetric(f64),
    #[error("performance range is inverted: best {best} > worst {worst}")]
    InvertedRange { best: f64, worst: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupingError {
    #[error("report {report} is covered by both {first} and {second}")]
    DoublyCovered {
        report: ReportId,
        first: FixId,
        second: FixId,
    },
    #[error("fix {fix} covers unknown or unaccepted report {report}")]
    UnknownReport { fix: FixId, report: ReportId },
    #[error("fix {fix} covers reports against more than one target")]
    MixedTargets { fix: FixId },
    #[error("fix {0} covers no reports")]
    EmptyFix(FixId),
}

/// Contest-wide scoring constants.
///
/// Every penalty is derived from the multiplier `M`: correctness bugs cost
/// `M/2`, crashes `M`, and security failures `2M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringConfig {
    #[serde(default = "default_multiplier")]
    pub multiplier: u32,
    #[serde(default = "default_report_limit")]
    pub per_target_report_limit: u32,
}

fn default_multiplier() -> u32 {
    50
}

fn default_report_limit() -> u32 {
    5
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            multiplier: default_multiplier(),
            per_target_report_limit: default_report_limit(),
        }
    }
}

impl ScoringConfig {
    pub fn new(multiplier: u32, per_target_report_limit: u32) -> Result<Self, ScoringError> {
        let cfg = Self {
            multiplier,
            per_target_report_limit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        if self.multiplier == 0 {
            return Err(ScoringError::ZeroMultiplier);
        }
        if self.per_target_report_limit == 0 {
            return Err(ScoringError::ZeroReportLimit);
        }
        Ok(())
    }

    pub fn m(&self) -> Points {
        Points::from_integer(i64::from(self.multiplier))
    }

    pub fn mandatory_test_weight(&self) -> Points {
        self.m()
    }

    pub fn optional_test_weight(&self) -> Points {
        self.m() / 2
    }

    pub fn correctness_penalty(&self) -> Points {
        self.m() / 2
    }

    pub fn crash_penalty(&self) -> Points {
        self.m()
    }

    pub fn security_penalty(&self) -> Points {
        self.m() * 2
    }

    /// The value `P` of a defect of the given category.
    pub fn penalty(&self, category: BugCategory) -> Points {
        match category {
            BugCategory::Correctness => self.correctness_penalty(),
            BugCategory::Crash => self.crash_penalty(),
            BugCategory::Integrity | BugCategory::Privacy => self.security_penalty(),
        }
    }
}

/// One performance test result, lower is better.
///
/// `best` and `worst` range over every qualified submission's measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMeasure {
    pub value: f64,
    pub best: f64,
    pub worst: f64,
}

fn check_metric(v: f64) -> Result<f64, ScoringError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ScoringError::BadMetric(v))
    }
}

/// Points for one performance test: `M·(worst − v)/(worst − best)`.
///
/// `v` is clamped into `[best, worst]`. When every submission measured the
/// same (`best == worst`) nobody can be discriminated and all get `M`.
pub fn performance_value(m: &PerformanceMeasure, cfg: &ScoringConfig) -> Result<f64, ScoringError> {
    let value = check_metric(m.value)?;
    let best = check_metric(m.best)?;
    let worst = check_metric(m.worst)?;
    let multiplier = f64::from(cfg.multiplier);
    if best > worst {
        return Err(ScoringError::InvertedRange { best, worst });
    }
    if best == worst {
        return Ok(multiplier);
    }
    let v = value.clamp(best, worst);
    let points = multiplier * (worst - v) / (worst - best);
    Ok(points.clamp(0.0, multiplier))
}

/// A single correctness test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessOutcome {
    pub mandatory: bool,
    pub passed: bool,
}

/// Result of scoring a build submission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "points")]
pub enum ShipScore {
    Qualified(f64),
    NotQualified,
}

impl ShipScore {
    pub fn points(&self) -> Option<f64> {
        match self {
            ShipScore::Qualified(p) => Some(*p),
            ShipScore::NotQualified => None,
        }
    }

    pub fn is_qualified(&self) -> bool {
        matches!(self, ShipScore::Qualified(_))
    }
}

/// Sum of correctness and performance points; withheld if any mandatory test
/// failed.
pub fn ship_score(
    correctness: &[CorrectnessOutcome],
    perf: &[PerformanceMeasure],
    cfg: &ScoringConfig,
) -> Result<ShipScore, ScoringError> {
    if correctness.iter().any(|t| t.mandatory && !t.passed) {
        return Ok(ShipScore::NotQualified);
    }
    let m = f64::from(cfg.multiplier);
    let mut total = 0.0;
    for t in correctness.iter().filter(|t| t.passed) {
        total += if t.mandatory { m } else { m / 2.0 };
    }
    for p in perf {
        total += performance_value(p, cfg)?;
    }
    Ok(ShipScore::Qualified(total))
}

/// A report that survived judging and the per-target caps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedReport {
    pub id: ReportId,
    pub breaker: TeamId,
    pub target: TeamId,
    pub category: BugCategory,
}

/// A fix a judge confirmed addresses a single defect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedFix {
    pub id: FixId,
    pub covered: Vec<ReportId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum DefectId {
    Fix(FixId),
    Report(ReportId),
}

/// A unique defect: every accepted report one accepted fix covers, or a
/// lone report no fix covered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectGroup {
    pub id: DefectId,
    pub target: TeamId,
    pub category: BugCategory,
    pub members: Vec<AcceptedReport>,
}

impl DefectGroup {
    pub fn finder_teams(&self) -> BTreeSet<&TeamId> {
        self.members.iter().map(|r| &r.breaker).collect()
    }

    /// `N`, the number of distinct teams that found this defect.
    pub fn finder_count(&self) -> usize {
        self.finder_teams().len()
    }

    /// Each finder's share of this defect's value.
    ///
    /// A team's weight is the value of its most severe report in the group;
    /// the group's value `P` is split in proportion to the weights. When all
    /// members share a category every weight is equal and each team gets
    /// exactly `P/N`. In general no team's share exceeds its weight, so tying
    /// reports together never raises anyone's total.
    pub fn shares(&self, cfg: &ScoringConfig) -> BTreeMap<TeamId, Points> {
        let mut weights: BTreeMap<TeamId, Points> = BTreeMap::new();
        for r in &self.members {
            let w = cfg.penalty(r.category);
            weights
                .entry(r.breaker.clone())
                .and_modify(|cur| {
                    if w > *cur {
                        *cur = w;
                    }
                })
                .or_insert(w);
        }
        let total: Points = weights.values().copied().sum();
        let value = cfg.penalty(self.category);
        weights
            .into_iter()
            .map(|(team, w)| (team, value * w / total))
            .collect()
    }
}

fn more_severe(a: BugCategory, b: BugCategory) -> BugCategory {
    // Ties between privacy and integrity keep the first seen.
    if b.severity() > a.severity() {
        b
    } else {
        a
    }
}

/// Turns accepted reports into unique defects using the accepted fixes.
///
/// Reports one fix covers become one group; every other report stands alone.
/// Groups are returned fix groups first (in fix order), then singletons in
/// report order.
pub fn group_by_fixes(
    accepted: &[AcceptedReport],
    fixes: &[AcceptedFix],
) -> Result<Vec<DefectGroup>, GroupingError> {
    let by_id: BTreeMap<&ReportId, &AcceptedReport> = accepted.iter().map(|r| (&r.id, r)).collect();
    let mut covered_by: BTreeMap<&ReportId, &FixId> = BTreeMap::new();
    let mut groups = Vec::new();

    for fix in fixes {
        let mut members: Vec<AcceptedReport> = Vec::new();
        for rid in &fix.covered {
            let report = by_id.get(rid).ok_or_else(|| GroupingError::UnknownReport {
                fix: fix.id.clone(),
                report: rid.clone(),
            })?;
            if let Some(prev) = covered_by.insert(&report.id, &fix.id) {
                if prev != &fix.id {
                    return Err(GroupingError::DoublyCovered {
                        report: rid.clone(),
                        first: prev.clone(),
                        second: fix.id.clone(),
                    });
                }
                // Listed twice by the same fix.
                continue;
            }
            members.push((*report).clone());
        }
        let Some(first) = members.first() else {
            return Err(GroupingError::EmptyFix(fix.id.clone()));
        };
        let target = first.target.clone();
        if members.iter().any(|r| r.target != target) {
            return Err(GroupingError::MixedTargets { fix: fix.id.clone() });
        }
        let category = members
            .iter()
            .map(|r| r.category)
            .reduce(more_severe)
            .unwrap_or(BugCategory::Correctness);
        groups.push(DefectGroup {
            id: DefectId::Fix(fix.id.clone()),
            target,
            category,
            members,
        });
    }

    for r in accepted {
        if !covered_by.contains_key(&r.id) {
            groups.push(DefectGroup {
                id: DefectId::Report(r.id.clone()),
                target: r.target.clone(),
                category: r.category,
                members: alloc::vec![r.clone()],
            });
        }
    }
    Ok(groups)
}

/// The groups that count against a submission's resilience.
///
/// Privacy and integrity breaks cannot be told apart by root cause, so at
/// most one group of each counts per target; the first one listed is kept.
pub fn resilience_groups<'a>(groups: &'a [DefectGroup]) -> Vec<&'a DefectGroup> {
    let mut seen: BTreeSet<(&TeamId, BugCategory)> = BTreeSet::new();
    groups
        .iter()
        .filter(|g| !g.category.is_security() || seen.insert((&g.target, g.category)))
        .collect()
}

/// `−Σ P(category)` over the unique defects against one submission.
pub fn resilience_score(groups: &[DefectGroup], cfg: &ScoringConfig) -> Points {
    -resilience_groups(groups)
        .into_iter()
        .map(|g| cfg.penalty(g.category))
        .sum::<Points>()
}

/// Per-team break totals over all defect groups.
pub fn break_scores(groups: &[DefectGroup], cfg: &ScoringConfig) -> BTreeMap<TeamId, Points> {
    let mut totals: BTreeMap<TeamId, Points> = BTreeMap::new();
    for g in groups {
        for (team, share) in g.shares(cfg) {
            *totals.entry(team).or_insert_with(|| Points::from_integer(0)) += share;
        }
    }
    totals
}

/// A judged-or-pending report competing for a slot against one target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapCandidate {
    pub id: ReportId,
    pub breaker: TeamId,
    pub target: TeamId,
    pub category: BugCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapDecision {
    Kept,
    /// The breaker already holds the maximum number of reports on the target.
    LimitExceeded,
    /// The breaker already holds a report of this security category.
    CategoryExceeded,
}

/// Applies the per-(breaker, target) caps to candidates in submission order.
///
/// The first `per_target_report_limit` candidates are kept, and of those at
/// most one privacy and one integrity report.
pub fn enforce_report_caps(
    candidates: &[CapCandidate],
    cfg: &ScoringConfig,
) -> Vec<(ReportId, CapDecision)> {
    let limit = cfg.per_target_report_limit as usize;
    let mut kept: BTreeMap<(&TeamId, &TeamId), usize> = BTreeMap::new();
    let mut security: BTreeSet<(&TeamId, &TeamId, BugCategory)> = BTreeSet::new();
    candidates
        .iter()
        .map(|c| {
            let pair = (&c.breaker, &c.target);
            let count = kept.entry(pair).or_insert(0);
            let decision = if *count >= limit {
                CapDecision::LimitExceeded
            } else if c.category.is_security()
                && !security.insert((&c.breaker, &c.target, c.category))
            {
                CapDecision::CategoryExceeded
            } else {
                *count += 1;
                CapDecision::Kept
            };
            (c.id.clone(), decision)
        })
        .collect()
}

/// Renders an exact score with two decimals, rounding half away from zero.
pub fn format_points(p: &Points) -> String {
    let scaled = *p * Points::from_integer(100);
    let rounded = scaled.round().to_integer();
    let sign = if rounded < 0 { "-" } else { "" };
    let abs = rounded.unsigned_abs();
    alloc::format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScoringConfig {
        ScoringConfig::default()
    }

    fn pts(n: i64) -> Points {
        Points::from_integer(n)
    }

    fn report(id: &str, breaker: &str, target: &str, category: BugCategory) -> AcceptedReport {
        AcceptedReport {
            id: id.into(),
            breaker: breaker.into(),
            target: target.into(),
            category,
        }
    }

    fn fix(id: &str, covered: &[&str]) -> AcceptedFix {
        AcceptedFix {
            id: id.into(),
            covered: covered.iter().map(|r| ReportId::from(*r)).collect(),
        }
    }

    #[test]
    fn penalty_schedule_follows_multiplier() {
        let c = cfg();
        assert_eq!(c.correctness_penalty(), pts(25));
        assert_eq!(c.crash_penalty(), pts(50));
        assert_eq!(c.security_penalty(), pts(100));
        assert_eq!(c.optional_test_weight(), pts(25));
        assert_eq!(c.security_penalty(), c.correctness_penalty() * 4);
        assert_eq!(c.crash_penalty(), c.correctness_penalty() * 2);
        assert_eq!(ScoringConfig::new(0, 5), Err(ScoringError::ZeroMultiplier));
        assert_eq!(ScoringConfig::new(50, 0), Err(ScoringError::ZeroReportLimit));
    }

    #[test]
    fn performance_endpoints_and_midpoint() {
        let c = cfg();
        let at = |v| performance_value(&PerformanceMeasure { value: v, best: 10.0, worst: 20.0 }, &c);
        assert_eq!(at(10.0), Ok(50.0));
        assert_eq!(at(20.0), Ok(0.0));
        assert_eq!(at(15.0), Ok(25.0));
        // Outside the observed range is clamped.
        assert_eq!(at(5.0), Ok(50.0));
        assert_eq!(at(30.0), Ok(0.0));
    }

    #[test]
    fn performance_degenerate_and_bad_metrics() {
        let c = cfg();
        let same = PerformanceMeasure { value: 3.0, best: 3.0, worst: 3.0 };
        assert_eq!(performance_value(&same, &c), Ok(50.0));
        let nan = PerformanceMeasure { value: f64::NAN, best: 1.0, worst: 2.0 };
        assert!(matches!(performance_value(&nan, &c), Err(ScoringError::BadMetric(_))));
        let neg = PerformanceMeasure { value: -1.0, best: 1.0, worst: 2.0 };
        assert_eq!(performance_value(&neg, &c), Err(ScoringError::BadMetric(-1.0)));
        let inv = PerformanceMeasure { value: 1.5, best: 2.0, worst: 1.0 };
        assert!(matches!(performance_value(&inv, &c), Err(ScoringError::InvertedRange { .. })));
    }

    #[test]
    fn ship_score_examples() {
        let c = cfg();
        let pass = |mandatory| CorrectnessOutcome { mandatory, passed: true };
        let fail = |mandatory| CorrectnessOutcome { mandatory, passed: false };
        assert_eq!(
            ship_score(&[pass(true), pass(true), pass(false)], &[], &c),
            Ok(ShipScore::Qualified(125.0))
        );
        assert_eq!(ship_score(&[fail(true), fail(false)], &[], &c), Ok(ShipScore::NotQualified));
        let perf = PerformanceMeasure { value: 1.0, best: 1.0, worst: 4.0 };
        assert_eq!(ship_score(&[pass(true)], &[perf], &c), Ok(ShipScore::Qualified(100.0)));
        // A failed optional test costs nothing and does not disqualify.
        assert_eq!(ship_score(&[pass(true), fail(false)], &[], &c), Ok(ShipScore::Qualified(50.0)));
    }

    #[test]
    fn resilience_examples() {
        let c = cfg();
        assert_eq!(resilience_score(&[], &c), pts(0));
        let groups = group_by_fixes(
            &[
                report("r1", "b", "t", BugCategory::Correctness),
                report("r2", "b", "t", BugCategory::Integrity),
            ],
            &[],
        )
        .unwrap();
        assert_eq!(resilience_score(&groups, &c), pts(-125));
        let three = group_by_fixes(
            &[
                report("r1", "a", "t", BugCategory::Correctness),
                report("r2", "b", "t", BugCategory::Correctness),
                report("r3", "c", "t", BugCategory::Correctness),
            ],
            &[],
        )
        .unwrap();
        assert_eq!(resilience_score(&three, &c), pts(-75));
    }

    #[test]
    fn resilience_counts_one_break_per_security_category() {
        let c = cfg();
        let groups = group_by_fixes(
            &[
                report("r1", "a", "t", BugCategory::Integrity),
                report("r2", "b", "t", BugCategory::Integrity),
                report("r3", "b", "t", BugCategory::Privacy),
                report("r4", "c", "u", BugCategory::Integrity),
            ],
            &[],
        )
        .unwrap();
        let t: Vec<_> = groups.iter().filter(|g| g.target.as_str() == "t").cloned().collect();
        assert_eq!(resilience_score(&t, &c), pts(-200));
        // Break scoring is not collapsed.
        let scores = break_scores(&groups, &c);
        assert_eq!(scores[&TeamId::from("a")], pts(100));
        assert_eq!(scores[&TeamId::from("b")], pts(200));
    }

    #[test]
    fn break_score_examples() {
        let c = cfg();
        let integrity = group_by_fixes(
            &[
                report("r1", "a", "t", BugCategory::Integrity),
                report("r2", "b", "t", BugCategory::Integrity),
            ],
            &[fix("f1", &["r1", "r2"])],
        )
        .unwrap();
        let s = break_scores(&integrity, &c);
        assert_eq!(s[&TeamId::from("a")], pts(50));
        assert_eq!(s[&TeamId::from("b")], pts(50));

        let crash = group_by_fixes(
            &[
                report("r1", "a", "t", BugCategory::Crash),
                report("r2", "b", "t", BugCategory::Crash),
                report("r3", "c", "t", BugCategory::Crash),
            ],
            &[fix("f1", &["r1", "r2", "r3"])],
        )
        .unwrap();
        let s = break_scores(&crash, &c);
        for team in ["a", "b", "c"] {
            assert_eq!(s[&TeamId::from(team)], Points::new(50, 3));
        }
        assert_eq!(s.values().copied().sum::<Points>(), pts(50));

        let solo = group_by_fixes(
            &[
                report("r1", "a", "t", BugCategory::Correctness),
                report("r2", "a", "u", BugCategory::Correctness),
            ],
            &[],
        )
        .unwrap();
        assert_eq!(break_scores(&solo, &c)[&TeamId::from("a")], pts(50));
    }

    #[test]
    fn grouping_examples() {
        let reports = [
            report("r1", "A", "t", BugCategory::Correctness),
            report("r2", "B", "t", BugCategory::Correctness),
            report("r3", "B", "t", BugCategory::Crash),
        ];
        let g = group_by_fixes(&reports, &[fix("f", &["r1", "r2"])]).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].id, DefectId::Fix("f".into()));
        assert_eq!(g[0].finder_count(), 2);
        assert_eq!(g[1].id, DefectId::Report("r3".into()));

        let none = group_by_fixes(&reports, &[]).unwrap();
        assert_eq!(none.len(), 3);
        assert!(none.iter().all(|g| g.finder_count() == 1));

        let single = group_by_fixes(&reports, &[fix("f", &["r1"])]).unwrap();
        assert_eq!(single[0].finder_count(), 1);
        assert_eq!(single.len(), 3);
    }

    #[test]
    fn grouping_takes_most_severe_category() {
        let reports = [
            report("r1", "A", "t", BugCategory::Correctness),
            report("r2", "B", "t", BugCategory::Integrity),
            report("r3", "C", "t", BugCategory::Crash),
        ];
        let g = group_by_fixes(&reports, &[fix("f", &["r1", "r2", "r3"])]).unwrap();
        assert_eq!(g[0].category, BugCategory::Integrity);
        let shares = g[0].shares(&cfg());
        // Weights 25, 100, 50 split a value of 100.
        assert_eq!(shares[&TeamId::from("A")], Points::new(100 * 25, 175));
        assert_eq!(shares[&TeamId::from("B")], Points::new(100 * 100, 175));
        assert_eq!(shares.values().copied().sum::<Points>(), pts(100));
        assert!(shares[&TeamId::from("A")] <= pts(25));
    }

    #[test]
    fn grouping_errors() {
        let reports = [
            report("r1", "A", "t", BugCategory::Correctness),
            report("r2", "B", "u", BugCategory::Correctness),
        ];
        assert!(matches!(
            group_by_fixes(&reports, &[fix("f1", &["r1"]), fix("f2", &["r1"])]),
            Err(GroupingError::DoublyCovered { .. })
        ));
        assert!(matches!(
            group_by_fixes(&reports, &[fix("f1", &["r9"])]),
            Err(GroupingError::UnknownReport { .. })
        ));
        assert!(matches!(
            group_by_fixes(&reports, &[fix("f1", &["r1", "r2"])]),
            Err(GroupingError::MixedTargets { .. })
        ));
        assert!(matches!(group_by_fixes(&reports, &[fix("f1", &[])]), Err(GroupingError::EmptyFix(_))));
    }

    fn candidates(n: usize, category: BugCategory) -> Vec<CapCandidate> {
        (0..n)
            .map(|i| CapCandidate {
                id: ReportId(alloc::format!("r{i}")),
                breaker: "b".into(),
                target: "t".into(),
                category,
            })
            .collect()
    }

    fn kept(decisions: &[(ReportId, CapDecision)]) -> usize {
        decisions.iter().filter(|(_, d)| *d == CapDecision::Kept).count()
    }

    #[test]
    fn caps_examples() {
        let five = ScoringConfig::new(50, 5).unwrap();
        let d = enforce_report_caps(&candidates(7, BugCategory::Correctness), &five);
        assert_eq!(kept(&d), 5);
        assert!(d[..5].iter().all(|(_, d)| *d == CapDecision::Kept));
        assert_eq!(d[5].1, CapDecision::LimitExceeded);

        let d = enforce_report_caps(&candidates(2, BugCategory::Integrity), &five);
        assert_eq!(d[0].1, CapDecision::Kept);
        assert_eq!(d[1].1, CapDecision::CategoryExceeded);

        let ten = ScoringConfig::new(50, 10).unwrap();
        assert_eq!(kept(&enforce_report_caps(&candidates(10, BugCategory::Correctness), &ten)), 10);
    }

    #[test]
    fn caps_are_per_pair() {
        let c = ScoringConfig::new(50, 1).unwrap();
        let mut cands = candidates(1, BugCategory::Privacy);
        cands.push(CapCandidate {
            id: "x".into(),
            breaker: "b".into(),
            target: "u".into(),
            category: BugCategory::Privacy,
        });
        cands.push(CapCandidate {
            id: "y".into(),
            breaker: "c".into(),
            target: "t".into(),
            category: BugCategory::Privacy,
        });
        assert_eq!(kept(&enforce_report_caps(&cands, &c)), 3);
    }

    #[test]
    fn points_formatting() {
        assert_eq!(format_points(&Points::new(50, 3)), "16.67");
        assert_eq!(format_points(&pts(-125)), "-125.00");
        assert_eq!(format_points(&Points::new(1, 8)), "0.13");
        assert_eq!(format_points(&pts(0)), "0.00");
        assert_eq!(format_points(&Points::new(-1, 3)), "-0.33");
    }

    #[test]
    fn severity_order_puts_security_on_top() {
        assert_eq!(more_severe(BugCategory::Crash, BugCategory::Correctness), BugCategory::Crash);
        assert_eq!(more_severe(BugCategory::Crash, BugCategory::Privacy), BugCategory::Privacy);
        assert_eq!(more_severe(BugCategory::Integrity, BugCategory::Privacy), BugCategory::Integrity);
    }
}
