//! The augmentation loop: plan → prompts → generation → validation → append.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledCorpus;
use crate::error::Result;
use crate::generator::{generate_batch, FailureKind, GenerationOutcome, GenerationRequest, TextGenerator};
use crate::promptgen::{render, spec_for_class, KeywordTable, PromptConfig};
use crate::sampler::{build_plan, MinorityPlan, SamplerConfig};
use crate::taxonomy::Taxonomy;
use crate::util;

/// Everything a run reads; all of it validated beforehand.
#[derive(Debug, Clone, Copy)]
pub struct AugmentInputs<'a> {
    pub corpus: &'a LabeledCorpus,
    pub taxonomy: &'a Taxonomy,
    pub keywords: &'a KeywordTable,
    pub sampler: &'a SamplerConfig,
    pub prompt: &'a PromptConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub requested: u64,
    pub succeeded: u64,
    pub failed: u64,
}

/// A plan slot whose latest attempt failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFailure {
    pub code: String,
    pub slot: u64,
    pub request_index: u64,
    pub seed: u64,
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRun {
    pub seed: u64,
    pub plan: MinorityPlan,
    pub classes: BTreeMap<String, ClassTally>,
    pub original_size: u64,
    /// Generated proposals that passed validation (cumulative over top-ups).
    pub succeeded: u64,
    pub appended: u64,
    pub dropped: u64,
    pub augmented_size: u64,
    pub top_up_rounds: u32,
    pub failures: Vec<SlotFailure>,
    /// Wall-clock time; kept out of the serialized report so reports stay reproducible.
    #[serde(skip)]
    pub duration: Duration,
}

impl AugmentRun {
    pub fn requested(&self) -> u64 {
        self.classes.values().map(|t| t.requested).sum()
    }

    pub fn failed(&self) -> u64 {
        self.classes.values().map(|t| t.failed).sum()
    }
}

/// Seed for one plan slot; independent of every other slot.
pub fn slot_seed(run_seed: u64, code: &str, slot: u64, round: u32) -> u64 {
    if round == 0 {
        util::derive_seed(run_seed, &[code, &slot.to_string()])
    } else {
        util::derive_seed(run_seed, &[code, &slot.to_string(), "top-up", &round.to_string()])
    }
}

struct Slot {
    code: String,
    slot: u64,
    request_index: u64,
}

fn build_requests(slots: &[Slot], inputs: &AugmentInputs, run_seed: u64, round: u32) -> Result<Vec<GenerationRequest>> {
    slots
        .iter()
        .map(|s| {
            let seed = slot_seed(run_seed, &s.code, s.slot, round);
            let spec = spec_for_class(inputs.taxonomy, inputs.keywords, &s.code, inputs.prompt, seed)?;
            let prompt = render(&spec)?;
            Ok(GenerationRequest {
                spec,
                prompt,
                target_class: s.code.clone(),
                request_index: s.request_index,
                seed,
            })
        })
        .collect()
}

/// Issues `f_c` requests per class and appends every valid result.
///
/// Generation failures never abort the run; they are listed in
/// [`AugmentRun::failures`] and can be retried with [`top_up`].
pub fn run_augmentation(
    inputs: &AugmentInputs,
    backend: &dyn TextGenerator,
    seed: u64,
) -> Result<(AugmentRun, LabeledCorpus)> {
    let started = Instant::now();
    let plan = build_plan(inputs.corpus, inputs.taxonomy, inputs.sampler)?;
    let mut slots = Vec::new();
    let mut classes = BTreeMap::new();
    for row in &plan.rows {
        classes.insert(
            row.code.clone(),
            ClassTally {
                requested: row.alloc,
                ..Default::default()
            },
        );
        for slot in 0..row.alloc {
            slots.push(Slot {
                code: row.code.clone(),
                slot,
                request_index: slots.len() as u64,
            });
        }
    }
    let requests = build_requests(&slots, inputs, seed, 0)?;
    let outcomes = generate_batch(&requests, backend, inputs.taxonomy);

    let mut run = AugmentRun {
        seed,
        plan,
        classes,
        original_size: inputs.corpus.len() as u64,
        succeeded: 0,
        appended: 0,
        dropped: 0,
        augmented_size: inputs.corpus.len() as u64,
        top_up_rounds: 0,
        failures: Vec::new(),
        duration: Duration::ZERO,
    };
    let augmented = absorb(&mut run, inputs.corpus, &slots, outcomes, false)?;
    run.duration = started.elapsed();
    Ok((run, augmented))
}

fn absorb(
    run: &mut AugmentRun,
    corpus: &LabeledCorpus,
    slots: &[Slot],
    outcomes: Vec<GenerationOutcome>,
    retry: bool,
) -> Result<LabeledCorpus> {
    let mut accepted = Vec::new();
    let mut failures = Vec::new();
    for (slot, outcome) in slots.iter().zip(outcomes) {
        debug_assert_eq!(slot.request_index, outcome.request_index);
        let tally = run.classes.get_mut(&slot.code).expect("slot class in plan");
        match outcome.result {
            Ok(p) => {
                tally.succeeded += 1;
                if retry {
                    tally.failed -= 1;
                }
                accepted.push(p);
            }
            Err(f) => {
                if !retry {
                    tally.failed += 1;
                }
                failures.push(SlotFailure {
                    code: slot.code.clone(),
                    slot: slot.slot,
                    request_index: slot.request_index,
                    seed: outcome.seed,
                    kind: f.kind,
                    detail: f.detail,
                });
            }
        }
    }
    run.succeeded += accepted.len() as u64;
    let (augmented, stats) = corpus.append_generated(accepted)?;
    run.appended += stats.appended;
    run.dropped += stats.dropped;
    run.augmented_size = augmented.len() as u64;
    run.failures = failures;
    Ok(augmented)
}

/// Re-requests only the failed slots of `run`, with fresh per-slot seeds.
/// Returns the updated run and corpus; a run without failures is returned unchanged.
pub fn top_up(
    run: &AugmentRun,
    augmented: &LabeledCorpus,
    inputs: &AugmentInputs,
    backend: &dyn TextGenerator,
) -> Result<(AugmentRun, LabeledCorpus)> {
    if run.failures.is_empty() {
        return Ok((run.clone(), augmented.clone()));
    }
    let started = Instant::now();
    let mut next = run.clone();
    next.top_up_rounds += 1;
    let slots: Vec<Slot> = run
        .failures
        .iter()
        .map(|f| Slot {
            code: f.code.clone(),
            slot: f.slot,
            request_index: f.request_index,
        })
        .collect();
    let requests = build_requests(&slots, inputs, run.seed, next.top_up_rounds)?;
    let outcomes = generate_batch(&requests, backend, inputs.taxonomy);
    let corpus = absorb(&mut next, augmented, &slots, outcomes, true)?;
    next.duration = run.duration + started.elapsed();
    Ok((next, corpus))
}
