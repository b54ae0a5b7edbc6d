//! Simple generational genetic algorithm on Gray-coded bit strings.
//!
//! Structure: linear ranking with stochastic universal sampling, single-point
//! crossover, per-bit mutation, and fitness-based reinsertion where the
//! offspring replace the worst parents. Because the generation gap is below
//! one, the best parents always survive.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::composition::CompositionSpec;
use crate::error::{Error, Result};

/// Something the GA can minimize over `[0,1]^n`.
pub trait Objective {
    fn n_vars(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl Objective for CompositionSpec {
    fn n_vars(&self) -> usize {
        CompositionSpec::n_vars(self)
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x)
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn n_vars(&self) -> usize {
        (**self).n_vars()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
}

/// Wrapper counting every call to the wrapped objective.
pub struct CountingObjective<O> {
    inner: O,
    calls: Cell<u64>,
}

impl<O: Objective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}

impl<O: Objective> Objective for CountingObjective<O> {
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.evaluate(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    /// Bits per variable, at most 32.
    pub bits_per_variable: u32,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means one over the chromosome length.
    pub mutation_rate: Option<f64>,
    pub generation_gap: f64,
    pub selection_pressure: f64,
    pub max_evaluations: u64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            bits_per_variable: 20,
            crossover_rate: 0.7,
            mutation_rate: None,
            generation_gap: 0.9,
            selection_pressure: 2.0,
            max_evaluations: 200_000,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn offspring_count(&self) -> usize {
        ((self.generation_gap * self.population_size as f64).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return arg(format!(
                "population size must be even and >= 2, got {}",
                self.population_size
            ));
        }
        if !(1..=32).contains(&self.bits_per_variable) {
            return arg(format!(
                "bits per variable must be in 1..=32, got {}",
                self.bits_per_variable
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return arg(format!(
                "crossover rate {} outside [0, 1]",
                self.crossover_rate
            ));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return arg(format!("mutation rate {m} outside [0, 1]"));
            }
        }
        if !(self.generation_gap > 0.0 && self.generation_gap <= 1.0) {
            return arg(format!(
                "generation gap {} outside (0, 1]",
                self.generation_gap
            ));
        }
        if self.offspring_count() >= self.population_size {
            return arg("generation gap leaves no surviving parent".into());
        }
        if !(1.0..=2.0).contains(&self.selection_pressure) {
            return arg(format!(
                "selection pressure {} outside [1, 2]",
                self.selection_pressure
            ));
        }
        if self.max_evaluations <= self.population_size as u64 {
            return arg(format!(
                "budget of {} evaluations does not exceed one population of {}",
                self.max_evaluations, self.population_size
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Evaluations spent when the target was first reached.
    pub evaluations_to_converge: Option<u64>,
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub success: bool,
    pub evaluations_used: u64,
    /// Best-so-far value after the initial population and each generation.
    pub history: Vec<f64>,
}

type Chromosome = Vec<u32>;

/// Gray code to binary.
#[inline]
pub fn gray_decode(mut g: u32) -> u32 {
    let mut shift = 1;
    while shift < 32 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

#[inline]
pub fn gray_encode(b: u32) -> u32 {
    b ^ (b >> 1)
}

/// Generational GA state. Exposed so callers can step it manually.
pub struct GeneticAlgorithm<O> {
    config: GaConfig,
    objective: O,
    rng: ChaCha8Rng,
    mutation_rate: f64,
    population: Vec<Chromosome>,
    values: Vec<f64>,
    evaluations: u64,
    best_value: f64,
    best: Chromosome,
}

impl<O: Objective> GeneticAlgorithm<O> {
    /// Draws and evaluates the initial population.
    pub fn new(objective: O, config: GaConfig) -> Result<Self> {
        config.validate()?;
        let n = objective.n_vars();
        if n == 0 {
            return Err(Error::Argument("objective has no variables".into()));
        }
        let length = n as f64 * config.bits_per_variable as f64;
        let mutation_rate = config.mutation_rate.unwrap_or(1.0 / length);
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mask = gene_mask(config.bits_per_variable);
        let population: Vec<Chromosome> = (0..config.population_size)
            .map(|_| (0..n).map(|_| rng.random::<u32>() & mask).collect())
            .collect();
        let mut ga = Self {
            config,
            objective,
            rng,
            mutation_rate,
            values: Vec::new(),
            population: Vec::new(),
            evaluations: 0,
            best_value: f64::INFINITY,
            best: Vec::new(),
        };
        let values = population.iter().map(|c| ga.evaluate(c)).collect();
        ga.population = population;
        ga.values = values;
        Ok(ga)
    }

    pub fn decode(&self, chromosome: &[u32]) -> Vec<f64> {
        let scale = gene_mask(self.config.bits_per_variable) as f64;
        chromosome
            .iter()
            .map(|&g| gray_decode(g) as f64 / scale)
            .collect()
    }

    fn evaluate(&mut self, chromosome: &Chromosome) -> f64 {
        let x = self.decode(chromosome);
        let value = self.objective.evaluate(&x);
        self.evaluations += 1;
        if value < self.best_value {
            self.best_value = value;
            self.best = chromosome.clone();
        }
        value
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn best_point(&self) -> Vec<f64> {
        self.decode(&self.best)
    }

    pub fn population_values(&self) -> &[f64] {
        &self.values
    }

    /// Number of distinct chromosomes in the population.
    pub fn distinct_chromosomes(&self) -> usize {
        let mut sorted = self.population.clone();
        sorted.sort();
        sorted.dedup();
        sorted.len()
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }

    /// One generation: select, recombine, mutate, evaluate, reinsert.
    pub fn step(&mut self) {
        let pop = self.config.population_size;
        let offspring_count = self.config.offspring_count();

        // Rank best first; ties broken by position for determinism.
        let mut order: Vec<usize> = (0..pop).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        let sp = self.config.selection_pressure;
        let rank_fitness: Vec<f64> = (0..pop)
            .map(|s| 2.0 - sp + 2.0 * (sp - 1.0) * (pop - 1 - s) as f64 / (pop - 1) as f64)
            .collect();

        let mut selected =
            self.stochastic_universal_sampling(&order, &rank_fitness, offspring_count);
        for i in (1..selected.len()).rev() {
            let j = self.rng.random_range(0..=i);
            selected.swap(i, j);
        }
        let mut offspring: Vec<Chromosome> = selected
            .iter()
            .map(|&i| self.population[i].clone())
            .collect();

        let bits = self.config.bits_per_variable;
        for pair in offspring.chunks_mut(2) {
            if let [a, b] = pair {
                if self.rng.random::<f64>() < self.config.crossover_rate {
                    let length = a.len() as u32 * bits;
                    if length > 1 {
                        let point = self.rng.random_range(1..length);
                        single_point_crossover(a, b, point, bits);
                    }
                }
            }
        }
        for child in offspring.iter_mut() {
            self.mutate(child);
        }
        let child_values: Vec<f64> = offspring.iter().map(|c| self.evaluate(c)).collect();

        // Offspring replace the worst parents.
        for (slot, (child, value)) in order
            .iter()
            .rev()
            .zip(offspring.into_iter().zip(child_values))
        {
            self.population[*slot] = child;
            self.values[*slot] = value;
        }
    }

    fn stochastic_universal_sampling(
        &mut self,
        order: &[usize],
        fitness: &[f64],
        count: usize,
    ) -> Vec<usize> {
        let total: f64 = fitness.iter().sum();
        let spacing = total / count as f64;
        let mut pointer = self.rng.random::<f64>() * spacing;
        let mut selected = Vec::with_capacity(count);
        let mut cumulative = 0.0;
        let mut s = 0;
        while selected.len() < count {
            while s < order.len() - 1 && cumulative + fitness[s] <= pointer {
                cumulative += fitness[s];
                s += 1;
            }
            selected.push(order[s]);
            pointer += spacing;
        }
        selected
    }

    fn mutate(&mut self, chromosome: &mut Chromosome) {
        let pm = self.mutation_rate;
        if pm <= 0.0 {
            return;
        }
        let bits = self.config.bits_per_variable as u64;
        let length = chromosome.len() as u64 * bits;
        if pm >= 1.0 {
            let mask = gene_mask(bits as u32);
            chromosome.iter_mut().for_each(|g| *g ^= mask);
            return;
        }
        // Geometric gaps between flipped bits.
        let log_keep = (1.0 - pm).ln();
        let mut position = 0u64;
        loop {
            let u: f64 = self.rng.random();
            let gap = ((1.0 - u).ln() / log_keep).floor();
            if !(gap < (length - position) as f64) {
                break;
            }
            position += gap as u64;
            let gene = (position / bits) as usize;
            chromosome[gene] ^= 1 << (position % bits);
            position += 1;
            if position >= length {
                break;
            }
        }
    }
}

fn gene_mask(bits: u32) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// Swaps every bit at or after global position `point` between `a` and `b`.
fn single_point_crossover(a: &mut [u32], b: &mut [u32], point: u32, bits: u32) {
    let gene = (point / bits) as usize;
    let offset = point % bits;
    // Bits are numbered from the least significant end within each gene.
    let high = gene_mask(bits) & !gene_mask(offset);
    let (x, y) = (a[gene], b[gene]);
    a[gene] = (x & !high) | (y & high);
    b[gene] = (y & !high) | (x & high);
    for g in gene + 1..a.len() {
        std::mem::swap(&mut a[g], &mut b[g]);
    }
}

/// Runs the GA until the best value is within `epsilon` of `reference_best`
/// or the evaluation budget is exhausted. The target is checked after the
/// initial population and after every generation.
pub fn run_ga<O: Objective>(
    objective: O,
    ga: &GaConfig,
    reference_best: f64,
    epsilon: f64,
) -> Result<BenchmarkResult> {
    if !reference_best.is_finite() {
        return Err(Error::Argument("reference best must be finite".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    let target = reference_best + epsilon;
    let mut state = GeneticAlgorithm::new(objective, ga.clone())?;
    let offspring = ga.offspring_count() as u64;
    let mut history = vec![state.best_value()];
    let mut converged = state.best_value() <= target;
    while !converged && state.evaluations() + offspring <= ga.max_evaluations {
        state.step();
        history.push(state.best_value());
        converged = state.best_value() <= target;
    }
    Ok(BenchmarkResult {
        evaluations_to_converge: converged.then(|| state.evaluations()),
        best_value: state.best_value(),
        best_point: state.best_point(),
        success: converged,
        evaluations_used: state.evaluations(),
        history,
    })
}
