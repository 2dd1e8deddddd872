use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_at_n, random_f1, Metrics};
use crate::recmodel::{rank_candidates, FeatureContext, Recommender, Target};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub top_n: usize,
    /// Selection sizes to evaluate; 0 is the cold-start stage.
    pub rounds: Vec<usize>,
    /// Random selections drawn per mashup for each nonzero round.
    pub draws: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { top_n: 10, rounds: vec![0, 1, 2, 3], draws: 3, seed: 0 }
    }
}

/// One ranked list for one test mashup in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub fold: usize,
    pub mashup: String,
    pub round: usize,
    pub draw: usize,
    pub selected: Vec<usize>,
    pub rec: Vec<usize>,
    pub act: Vec<usize>,
    pub metrics: Metrics,
    /// Expected F1 of a random list over the same pool.
    pub random_f1: f64,
}

/// The selected set for a mashup in a given round and draw. Depends only on
/// the seed, fold, mashup id, round and draw, so every model sees the same
/// round states.
pub fn round_subset(root: u64, fold: usize, mashup_id: &str, components: &[usize], round: usize, draw: usize) -> Vec<usize> {
    let s = seed::derive_n(seed::derive(seed::derive_n(seed::derive(root, "rounds"), fold as u64), mashup_id), round as u64);
    let mut rng = seed::rng(seed::derive_n(s, draw as u64));
    components.choose_multiple(&mut rng, round).copied().collect()
}

/// Ranks every service outside the selected set for each test mashup of the
/// context's fold and scores the top `N` against the held-out components.
pub fn evaluate_fold(ctx: &FeatureContext, rec: &Recommender, cfg: &EvalConfig) -> Result<Vec<EvalRecord>> {
    let fold = ctx.fold.index;
    if rec.multi.meta.fold != fold || rec.cold.as_ref().is_some_and(|c| c.meta.fold != fold) {
        return Err(Error::Checkpoint(format!("model trained on fold {} evaluated on fold {fold}", rec.multi.meta.fold)));
    }
    let repo = &ctx.repo;
    let (cold, multi) = rec.scorers(ctx)?;
    let mut out = Vec::new();
    for &m in &ctx.fold.test {
        let mashup = repo.mashup(m);
        let target = Target::from_mashup(repo, m);
        for &round in &cfg.rounds {
            if round + 1 > mashup.components.len() {
                continue;
            }
            let draws = if round == 0 { 1 } else { cfg.draws };
            for draw in 0..draws {
                let selected = round_subset(cfg.seed, fold, &mashup.id, &mashup.components, round, draw);
                let pool: Vec<usize> = (0..repo.n_services()).filter(|s| !selected.contains(s)).collect();
                let act: BTreeSet<usize> = mashup.components.iter().copied().filter(|s| !selected.contains(s)).collect();
                let scorer = match (&cold, round) {
                    (Some(c), 0) => c,
                    _ => &multi,
                };
                let ranked = rank_candidates(repo, scorer.score(&target, &selected, &pool)?, cfg.top_n);
                let list: Vec<usize> = ranked.iter().map(|s| s.service).collect();
                let Some(metrics) = metrics_at_n(&list, &act, cfg.top_n, act.len()) else {
                    continue;
                };
                out.push(EvalRecord {
                    fold,
                    mashup: mashup.id.clone(),
                    round,
                    draw,
                    selected,
                    rec: list,
                    random_f1: random_f1(pool.len(), act.len(), cfg.top_n),
                    act: act.into_iter().collect(),
                    metrics,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub records: usize,
    pub metrics: Metrics,
    pub random_f1: f64,
}

/// Mean metrics per round and per stage. Stage 2 is the mean of the
/// round means for rounds 1 to 3 that have records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub variant: String,
    pub strategy: String,
    pub top_n: usize,
    pub rounds: Vec<RoundSummary>,
    pub stage1: Option<Metrics>,
    pub stage2: Option<Metrics>,
}

impl Report {
    pub fn from_records(variant: &str, strategy: &str, top_n: usize, records: &[EvalRecord]) -> Self {
        let mut by_round: BTreeMap<usize, Vec<&EvalRecord>> = BTreeMap::new();
        for r in records {
            by_round.entry(r.round).or_default().push(r);
        }
        let rounds: Vec<RoundSummary> = by_round
            .into_iter()
            .map(|(round, rs)| RoundSummary {
                round,
                records: rs.len(),
                metrics: Metrics::mean(rs.iter().map(|r| &r.metrics)).expect("non-empty"),
                random_f1: rs.iter().map(|r| r.random_f1).sum::<f64>() / rs.len() as f64,
            })
            .collect();
        let stage1 = rounds.iter().find(|r| r.round == 0).map(|r| r.metrics);
        let stage2 = Metrics::mean(rounds.iter().filter(|r| (1..=3).contains(&r.round)).map(|r| &r.metrics));
        Self { variant: variant.to_string(), strategy: strategy.to_string(), top_n, rounds, stage1, stage2 }
    }

    pub fn round(&self, round: usize) -> Option<&RoundSummary> {
        self.rounds.iter().find(|r| r.round == round)
    }

    pub fn tsv_header(&self) -> String {
        let n = self.top_n;
        format!("variant\tstrategy\trow\trecords\tP@{n}\tR@{n}\tF1@{n}\tMAP@{n}\tNDCG@{n}\trandomF1@{n}\n")
    }

    /// Rows per round, then `stage1` and `stage2`.
    pub fn tsv_rows(&self) -> String {
        let mut out = String::new();
        let mut row = |name: &str, records: String, m: &Metrics, random: String| {
            let [p, r, f1, map, ndcg] = m.to_array();
            let _ = writeln!(
                out,
                "{}\t{}\t{name}\t{records}\t{p:.6}\t{r:.6}\t{f1:.6}\t{map:.6}\t{ndcg:.6}\t{random}",
                self.variant, self.strategy
            );
        };
        for r in &self.rounds {
            row(&format!("round{}", r.round), r.records.to_string(), &r.metrics, format!("{:.6}", r.random_f1));
        }
        if let Some(m) = &self.stage1 {
            row("stage1", "-".into(), m, "-".into());
        }
        if let Some(m) = &self.stage2 {
            row("stage2", "-".into(), m, "-".into());
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        self.tsv_header() + &self.tsv_rows()
    }
}

/// Evaluates one recommender per fold and pools the records.
pub fn run_experiment(folds: &[(&FeatureContext, &Recommender)], cfg: &EvalConfig) -> Result<(Report, Vec<EvalRecord>)> {
    let Some((_, first)) = folds.first() else {
        return Err(Error::invalid("no folds to evaluate"));
    };
    let arch = &first.multi.meta.arch;
    let mut records = Vec::new();
    for (ctx, rec) in folds {
        let a = &rec.multi.meta.arch;
        if (a.variant, a.strategy) != (arch.variant, arch.strategy) {
            return Err(Error::invalid(format!("mixed models: {}/{} and {}/{}", arch.variant, arch.strategy, a.variant, a.strategy)));
        }
        records.extend(evaluate_fold(ctx, rec, cfg)?);
    }
    let report = Report::from_records(arch.variant.as_str(), arch.strategy.as_str(), cfg.top_n, &records);
    Ok((report, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k: usize,
    pub report: Report,
}

/// Retrains and evaluates with each neighbour count in `ks`; `train` builds
/// the recommender of one fold from a context carrying that count.
pub fn k_sweep<F>(contexts: &[FeatureContext], ks: &[usize], cfg: &EvalConfig, mut train: F) -> Result<Vec<KReport>>
where
    F: FnMut(&FeatureContext) -> Result<Recommender>,
{
    let mut out = Vec::new();
    for &k in ks {
        if k == 0 {
            return Err(Error::invalid("neighbour count must be positive"));
        }
        let mut trained = Vec::new();
        for ctx in contexts {
            let mut ctx = ctx.clone();
            ctx.config.k_neighbors = k;
            let rec = train(&ctx)?;
            trained.push((ctx, rec));
        }
        let pairs: Vec<(&FeatureContext, &Recommender)> = trained.iter().map(|(c, r)| (c, r)).collect();
        let (report, _) = run_experiment(&pairs, cfg)?;
        out.push(KReport { k, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recmodel::features::fixture::tiny_context;
    use crate::recmodel::{train_recommender, Strategy, TrainConfig, Variant};

    fn brief() -> TrainConfig {
        TrainConfig { epochs: 1, finetune_epochs: 1, ..TrainConfig::default() }
    }

    #[test]
    fn subsets_are_stable_and_distinct_per_draw() {
        let comps = [4, 9, 2, 7, 5];
        let a = round_subset(1, 0, "m7", &comps, 2, 0);
        assert_eq!(a, round_subset(1, 0, "m7", &comps, 2, 0));
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|s| comps.contains(s)));
        let draws: BTreeSet<Vec<usize>> = (0..6).map(|d| round_subset(1, 0, "m7", &comps, 2, d)).collect();
        assert!(draws.len() > 1);
        assert_ne!(round_subset(1, 0, "m7", &comps, 3, 0), round_subset(1, 1, "m7", &comps, 3, 0));
        assert!(round_subset(1, 0, "m7", &comps, 0, 0).is_empty());
    }

    #[test]
    fn records_respect_admissibility_and_exclusion() {
        let ctx = tiny_context();
        let rec = train_recommender(&ctx, Variant::Nisr, Strategy::Attention, &brief(), 3).unwrap();
        let cfg = EvalConfig { seed: 11, ..EvalConfig::default() };
        let records = evaluate_fold(&ctx, &rec, &cfg).unwrap();
        for r in &records {
            let m = ctx.repo.mashup_idx(&r.mashup).unwrap();
            assert!(ctx.fold.test.contains(&m));
            let comps = &ctx.repo.mashup(m).components;
            assert!(r.round < comps.len());
            assert_eq!(r.selected.len(), r.round);
            assert!(r.rec.len() <= 10);
            assert!(r.rec.iter().all(|s| !r.selected.contains(s)));
            assert_eq!(r.act.len() + r.selected.len(), comps.len());
            assert!(r.metrics.to_array().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for &m in &ctx.fold.test {
            let n = ctx.repo.mashup(m).components.len();
            let id = &ctx.repo.mashup(m).id;
            let count = |round| records.iter().filter(|r| &r.mashup == id && r.round == round).count();
            assert_eq!(count(0), 1);
            assert_eq!(count(3), if n > 3 { 3 } else { 0 });
        }
        assert_eq!(records, evaluate_fold(&ctx, &rec, &cfg).unwrap());
    }

    #[test]
    fn report_aggregation() {
        let rec = |round, f1| EvalRecord {
            fold: 0,
            mashup: "m".into(),
            round,
            draw: 0,
            selected: vec![],
            rec: vec![],
            act: vec![1],
            metrics: Metrics { f1, ..Metrics::default() },
            random_f1: 0.1,
        };
        let records = [rec(0, 0.2), rec(1, 0.4), rec(1, 0.6), rec(2, 0.2)];
        let report = Report::from_records("nisr", "none", 10, &records);
        assert_eq!(report.rounds.len(), 3);
        assert_eq!(report.stage1.unwrap().f1, 0.2);
        // mean of round means 0.5 and 0.2, not of the three records
        assert!((report.stage2.unwrap().f1 - 0.35).abs() < 1e-15);
        assert!(report.round(3).is_none());
        let tsv = report.to_tsv();
        assert_eq!(tsv.lines().count(), 1 + 3 + 2);
        assert!(tsv.starts_with("variant\tstrategy\trow\trecords\tP@10"));
        let empty = Report::from_records("nisr", "none", 10, &[]);
        assert!(empty.stage1.is_none() && empty.stage2.is_none());
    }

    #[test]
    fn cold_start_stage_matches_across_strategies() {
        let ctx = tiny_context();
        let cfg = EvalConfig { rounds: vec![0], seed: 2, ..EvalConfig::default() };
        let reports: Vec<Report> = [Strategy::Attention, Strategy::None]
            .into_iter()
            .map(|s| {
                let rec = train_recommender(&ctx, Variant::Nisr, s, &brief(), 4).unwrap();
                run_experiment(&[(&ctx, &rec)], &cfg).unwrap().0
            })
            .collect();
        assert_eq!(reports[0].rounds, reports[1].rounds);
        assert_eq!(reports[0].stage1, reports[1].stage1);
        assert_ne!(reports[0].strategy, reports[1].strategy);
    }

    #[test]
    fn fold_mismatch_is_an_error() {
        let ctx = tiny_context();
        let mut rec = train_recommender(&ctx, Variant::Nisr, Strategy::None, &brief(), 1).unwrap();
        rec.multi.meta.fold = 3;
        assert!(evaluate_fold(&ctx, &rec, &EvalConfig::default()).is_err());
        assert!(run_experiment(&[], &EvalConfig::default()).is_err());
    }

    #[test]
    fn sweep_gives_one_report_per_k() {
        let ctx = tiny_context();
        let cfg = EvalConfig { rounds: vec![0, 1], draws: 1, ..EvalConfig::default() };
        let mut seen = Vec::new();
        let out = k_sweep(std::slice::from_ref(&ctx), &[2, 500], &cfg, |c| {
            seen.push(c.config.k_neighbors);
            train_recommender(c, Variant::Nisr, Strategy::Average, &brief(), 1)
        })
        .unwrap();
        assert_eq!(seen, vec![2, 500]);
        assert_eq!(out.iter().map(|r| r.k).collect::<Vec<_>>(), vec![2, 500]);
        assert!(out.iter().all(|r| r.report.stage1.is_some() && r.report.stage2.is_some()));
    }
}
