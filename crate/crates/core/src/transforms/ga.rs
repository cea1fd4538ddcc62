//! Genetic lexical mutation over whitespace tokens.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{TransformContext, TransformError};
use crate::gateway::{extract_code, GenRequest, Role};
use crate::sandbox::{self, SandboxJob};
use crate::seeds::Rng;

/// GA knobs. Each fitness call costs one generation plus one sandbox run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_prob: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    /// Max sandbox jobs per GA call; `None` means `population_size * (generations + 1)`.
    pub fitness_budget: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 4,
            generations: 2,
            mutation_prob: 0.2,
            tournament_size: 2,
            elitism: 1,
            fitness_budget: None,
        }
    }
}

impl GaConfig {
    pub fn budget(&self) -> usize {
        self.fitness_budget
            .unwrap_or(self.population_size * (self.generations + 1))
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |m: String| Err(TransformError::Config(m));
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad(format!(
                "tournament_size {} must be in 1..={}",
                self.tournament_size, self.population_size
            ));
        }
        if self.elitism >= self.population_size {
            return bad(format!("elitism {} must be below population_size", self.elitism));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad(format!("mutation_prob {} outside [0, 1]", self.mutation_prob));
        }
        if self.budget() == 0 {
            return bad("fitness_budget must be positive".into());
        }
        Ok(())
    }
}

pub fn tokenize_prompt(prompt: &str) -> Vec<String> {
    prompt.split_whitespace().map(str::to_string).collect()
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// Single-point crossover: `a[..cut] ++ b[cut..]`.
pub fn crossover(a: &[String], b: &[String], cut: usize) -> Result<Vec<String>, TransformError> {
    if cut > a.len() {
        return Err(TransformError::IndexOutOfRange { cut, len: a.len() });
    }
    let mut child = a[..cut].to_vec();
    if cut < b.len() {
        child.extend_from_slice(&b[cut..]);
    }
    Ok(child)
}

/// Swap two distinct random positions.
pub fn index_shuffle(mut tokens: Vec<String>, rng: &mut Rng) -> Vec<String> {
    let n = tokens.len();
    if n < 2 {
        return tokens;
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    tokens.swap(i, j);
    tokens
}

/// Replace each position with a random vocabulary token with probability `prob`.
pub fn mutate(tokens: &[String], prob: f64, vocab: &[String], rng: &mut Rng) -> Result<Vec<String>, TransformError> {
    if vocab.is_empty() {
        return Err(TransformError::EmptyVocab);
    }
    let prob = prob.clamp(0.0, 1.0);
    Ok(tokens
        .iter()
        .map(|t| {
            if rng.random_bool(prob) {
                vocab[rng.random_range(0..vocab.len())].clone()
            } else {
                t.clone()
            }
        })
        .collect())
}

/// Fittest of `k` members drawn with replacement; ties go to the lowest index.
pub fn tournament_select<'p>(population: &'p [(Vec<String>, i64)], k: usize, rng: &mut Rng) -> &'p (Vec<String>, i64) {
    assert!(!population.is_empty(), "tournament over an empty population");
    let mut best = rng.random_range(0..population.len());
    for _ in 1..k.max(1) {
        let i = rng.random_range(0..population.len());
        let (fi, fb) = (population[i].1, population[best].1);
        if fi > fb || (fi == fb && i < best) {
            best = i;
        }
    }
    &population[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub prompt: String,
    pub fitness: i64,
    pub initial_fitness: i64,
    pub jobs_used: usize,
    /// Every evaluated candidate, in evaluation order.
    pub evaluated: Vec<(String, i64)>,
}

/// Fitness score of an execution failure; ranks below any executed program.
pub const FAILED_FITNESS: i64 = -1;

fn evaluate(
    candidates: &[Vec<String>],
    seeds: &[u64],
    ctx: &TransformContext<'_>,
) -> Result<Vec<i64>, TransformError> {
    let one = |tokens: &Vec<String>, seed: u64| -> Result<Option<i64>, TransformError> {
        let prompt = detokenize(tokens);
        if prompt.trim().is_empty() {
            return Ok(None);
        }
        let req = GenRequest::new(Role::CodeGenerator, prompt, ctx.decoding, seed);
        let raw = ctx.generator.generate(&req)?;
        let code = extract_code(&raw.raw_text, ctx.task.entry_point.as_deref());
        let job = SandboxJob::new(code, ctx.task.tests.clone())
            .with_timeout(ctx.timeout_ms)
            .with_entry_point(ctx.task.entry_point.clone());
        let verdict = sandbox::run(&job, ctx.executor)?;
        Ok(Some(if verdict.is_executed() {
            verdict.passed_count() as i64
        } else {
            FAILED_FITNESS
        }))
    };
    let workers = ctx.workers.clamp(1, candidates.len().max(1));
    let results: Vec<Result<Option<i64>, TransformError>> = if workers == 1 {
        candidates.iter().zip(seeds).map(|(c, s)| one(c, *s)).collect()
    } else {
        let chunk = candidates.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = candidates
                .chunks(chunk)
                .zip(seeds.chunks(chunk))
                .map(|(cs, ss)| {
                    let one = &one;
                    scope.spawn(move || cs.iter().zip(ss).map(|(c, s)| one(c, *s)).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("fitness worker panicked"))
                .collect()
        })
    };
    results
        .into_iter()
        .map(|r| r.map(|f| f.unwrap_or(FAILED_FITNESS)))
        .collect()
}

/// Evolve lexical variants of `prompt`, scoring each by passed-test count,
/// and return the best candidate ever seen (ties: earliest evaluated).
pub fn ga_mutate(prompt: &str, ctx: &mut TransformContext<'_>) -> Result<GaOutcome, TransformError> {
    let cfg = ctx.ga.clone();
    cfg.validate()?;
    let original = tokenize_prompt(prompt);
    if original.is_empty() {
        return Ok(GaOutcome {
            prompt: prompt.to_string(),
            fitness: FAILED_FITNESS,
            initial_fitness: FAILED_FITNESS,
            jobs_used: 0,
            evaluated: vec![],
        });
    }
    let mut vocab: Vec<String> = Vec::new();
    for t in &original {
        if !vocab.contains(t) {
            vocab.push(t.clone());
        }
    }
    let budget = cfg.budget();
    let mut jobs_used = 0usize;
    let mut evaluated: Vec<(String, i64)> = Vec::new();

    let mut initial = vec![original.clone()];
    for _ in 1..cfg.population_size {
        initial.push(index_shuffle(original.clone(), ctx.rng));
    }

    // Scores as many of `batch` as the budget allows, in order.
    let score = |batch: Vec<Vec<String>>,
                     ctx: &mut TransformContext<'_>,
                     jobs_used: &mut usize,
                     evaluated: &mut Vec<(String, i64)>|
     -> Result<Vec<(Vec<String>, i64)>, TransformError> {
        let room = budget.saturating_sub(*jobs_used);
        let batch: Vec<Vec<String>> = batch.into_iter().take(room).collect();
        let seeds: Vec<u64> = batch.iter().map(|_| ctx.rng.random()).collect();
        let fits = evaluate(&batch, &seeds, ctx)?;
        *jobs_used += batch.iter().filter(|c| !c.is_empty()).count();
        let scored: Vec<(Vec<String>, i64)> = batch.into_iter().zip(fits).collect();
        evaluated.extend(scored.iter().map(|(t, f)| (detokenize(t), *f)));
        Ok(scored)
    };

    let mut population = score(initial, ctx, &mut jobs_used, &mut evaluated)?;
    let initial_fitness = population[0].1;

    for _ in 0..cfg.generations {
        if jobs_used >= budget || population.len() < cfg.population_size {
            break;
        }
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| population[b].1.cmp(&population[a].1).then(a.cmp(&b)));
        let elites: Vec<(Vec<String>, i64)> = order[..cfg.elitism].iter().map(|&i| population[i].clone()).collect();

        let mut children = Vec::with_capacity(cfg.population_size - elites.len());
        for _ in elites.len()..cfg.population_size {
            let a = tournament_select(&population, cfg.tournament_size, ctx.rng).0.clone();
            let b = tournament_select(&population, cfg.tournament_size, ctx.rng).0.clone();
            let cut = ctx.rng.random_range(0..=a.len());
            let child = crossover(&a, &b, cut)?;
            let child = index_shuffle(child, ctx.rng);
            let child = mutate(&child, cfg.mutation_prob, &vocab, ctx.rng)?;
            children.push(child);
        }
        let scored = score(children, ctx, &mut jobs_used, &mut evaluated)?;
        population = elites.into_iter().chain(scored).collect();
    }

    let (best_prompt, best_fitness) = evaluated
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.1.cmp(&b.1).then(j.cmp(i)))
        .map(|(_, (p, f))| (p.clone(), *f))
        .expect("original prompt is always evaluated");
    let prompt = if best_prompt.trim().is_empty() {
        prompt.to_string()
    } else {
        best_prompt
    };
    Ok(GaOutcome {
        prompt,
        fitness: best_fitness,
        initial_fitness,
        jobs_used,
        evaluated,
    })
}
