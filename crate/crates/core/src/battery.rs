//! The tests and the orchestration that runs them over a [`WordStream`].
//!
//! Tests run in a fixed order, each on its own consecutive segment of the
//! stream: monobit, equidistribution, birthday spacings, 5-permutations,
//! craps. With second-level repetitions the whole sequence repeats, one
//! repetition after another.
//!
//! When the stream cannot supply the default sample sizes, every selected
//! test is scaled down by the same factor. A test scaled below its floor is
//! reported as not run instead of producing a low-power result.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, WordStream};
use crate::report::{classify, BatteryReport, Classification, NotRun};
use crate::stats::{self, PValue, StatsError};
use crate::Width;

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("stream exhausted: needed {needed} words, got {available}")]
    StreamExhausted { needed: u64, available: u64 },
    #[error("dice ran out after {played} of {games} games; throws far exceed the expected count")]
    DiceExhausted { played: usize, games: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    Monobit,
    Equidistribution,
    BirthdaySpacings,
    OverlappingPermutations,
    Craps,
}

impl TestId {
    /// Execution order.
    pub const ORDER: [TestId; 5] = [
        TestId::Monobit,
        TestId::Equidistribution,
        TestId::BirthdaySpacings,
        TestId::OverlappingPermutations,
        TestId::Craps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestId::Monobit => "monobit",
            TestId::Equidistribution => "equidistribution",
            TestId::BirthdaySpacings => "birthday_spacings",
            TestId::OverlappingPermutations => "overlapping_permutations",
            TestId::Craps => "craps",
        }
    }

    pub fn index(self) -> usize {
        TestId::ORDER.iter().position(|&t| t == self).unwrap()
    }

    pub fn description(self) -> &'static str {
        match self {
            TestId::Monobit => "ones vs zeros over the leading bits (z-test)",
            TestId::Equidistribution => "top-16-bit cell occupancy (chi-squared)",
            TestId::BirthdaySpacings => {
                "duplicate spacings among 512 24-bit birthdays vs Poisson(2)"
            }
            TestId::OverlappingPermutations => {
                "orderings of disjoint 5-tuples over 120 cells (chi-squared)"
            }
            TestId::Craps => "wins and throws per game over 200000 games of craps",
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestId {
    type Err = BatteryError;

    /// Accepts names, short aliases and the numeric index shown by `list`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(i) = s.parse::<usize>() {
            return TestId::ORDER
                .get(i)
                .copied()
                .ok_or_else(|| BatteryError::InvalidConfig(format!("no test with index {i}")));
        }
        let id = match s.to_ascii_lowercase().as_str() {
            "monobit" | "frequency" => TestId::Monobit,
            "equidistribution" | "equidist" => TestId::Equidistribution,
            "birthday_spacings" | "birthday" | "birthdays" => TestId::BirthdaySpacings,
            "overlapping_permutations" | "operm5" | "perm5" => TestId::OverlappingPermutations,
            "craps" => TestId::Craps,
            _ => return Err(BatteryError::InvalidConfig(format!("unknown test '{s}'"))),
        };
        Ok(id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BirthdayConfig {
    /// Birthdays per repetition.
    pub m: usize,
    /// Bits kept from the top of each word; the year has 2^bits days.
    pub bits: u32,
    pub reps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perm5Config {
    pub tuples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrapsConfig {
    pub games: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonobitConfig {
    pub bits: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquidistConfig {
    /// Power of two; cells are indexed by the top log2(cells) bits.
    pub cells: usize,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestConfig {
    pub birthday: BirthdayConfig,
    pub perm5: Perm5Config,
    pub craps: CrapsConfig,
    pub monobit: MonobitConfig,
    pub equidist: EquidistConfig,
    /// 0 disables second-level testing; otherwise at least 5.
    pub second_level_reps: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            birthday: BirthdayConfig {
                m: 512,
                bits: 24,
                reps: 500,
            },
            perm5: Perm5Config { tuples: 1_000_000 },
            craps: CrapsConfig { games: 200_000 },
            monobit: MonobitConfig { bits: 100_000_000 },
            equidist: EquidistConfig {
                cells: 1 << 16,
                samples: 10_000_000,
            },
            second_level_reps: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self, width: Width) -> Result<(), BatteryError> {
        let bad = |msg: String| Err(BatteryError::InvalidConfig(msg));
        let b = &self.birthday;
        if b.m < 2 {
            return bad(format!("birthday.m = {} must be at least 2", b.m));
        }
        if b.bits == 0 || b.bits > width.bits() {
            return bad(format!(
                "birthday.bits = {} must lie in 1..={}",
                b.bits,
                width.bits()
            ));
        }
        let e = &self.equidist;
        if !e.cells.is_power_of_two() || e.cells < 2 || e.cells.trailing_zeros() > width.bits() {
            return bad(format!(
                "equidist.cells = {} must be a power of two in 2..=2^{}",
                e.cells,
                width.bits()
            ));
        }
        if e.samples < 5 * e.cells {
            return bad(format!(
                "equidist.samples = {} must be at least 5 x cells = {}",
                e.samples,
                5 * e.cells
            ));
        }
        if b.reps == 0 || self.perm5.tuples == 0 || self.craps.games == 0 || self.monobit.bits == 0
        {
            return bad("all sample counts must be at least 1".into());
        }
        if self.second_level_reps != 0 && self.second_level_reps < 5 {
            return bad(format!(
                "second_level_reps = {} must be 0 or at least 5",
                self.second_level_reps
            ));
        }
        Ok(())
    }
}

/// One test's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub n_consumed_words: u64,
    pub statistic: f64,
    /// Degrees of freedom for χ² tests, λ for birthday spacings, z for
    /// craps and monobit.
    pub dof_or_param: f64,
    pub p: PValue,
    pub classification: Classification,
    pub notes: String,
}

impl TestResult {
    pub fn new(
        name: &str,
        n_consumed_words: u64,
        statistic: f64,
        dof_or_param: f64,
        p: PValue,
        notes: String,
    ) -> Self {
        TestResult {
            test_name: name.to_string(),
            n_consumed_words,
            statistic,
            dof_or_param,
            p,
            classification: classify(p),
            notes,
        }
    }
}

fn require(words: &[u64], needed: u64) -> Result<(), BatteryError> {
    if (words.len() as u64) < needed {
        return Err(BatteryError::StreamExhausted {
            needed,
            available: words.len() as u64,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// monobit

/// Bits are taken least-significant first within each word.
pub fn monobit(
    words: &[u64],
    width: Width,
    cfg: &MonobitConfig,
) -> Result<TestResult, BatteryError> {
    let wbits = u64::from(width.bits());
    let needed = cfg.bits.div_ceil(wbits);
    require(words, needed)?;
    let full = (cfg.bits / wbits) as usize;
    let mut ones: u64 = words[..full]
        .iter()
        .map(|w| u64::from(w.count_ones()))
        .sum();
    let rest = cfg.bits % wbits;
    if rest > 0 {
        ones += u64::from((words[full] & ((1u64 << rest) - 1)).count_ones());
    }
    let n = cfg.bits as f64;
    let s = (2.0 * ones as f64 - n) / n.sqrt();
    let p = stats::normal_tail_two_sided(s);
    Ok(TestResult::new(
        TestId::Monobit.name(),
        needed,
        s,
        s,
        p,
        format!("{} bits, {} ones", cfg.bits, ones),
    ))
}

// ---------------------------------------------------------------------------
// equidistribution

pub fn equidistribution(
    words: &[u64],
    width: Width,
    cfg: &EquidistConfig,
) -> Result<TestResult, BatteryError> {
    if !cfg.cells.is_power_of_two() || cfg.cells < 2 || cfg.samples < 5 * cfg.cells {
        return Err(BatteryError::InvalidConfig(format!(
            "equidistribution needs power-of-two cells >= 2 and samples >= 5 x cells (cells={}, samples={})",
            cfg.cells, cfg.samples
        )));
    }
    require(words, cfg.samples as u64)?;
    let shift = width.bits() - cfg.cells.trailing_zeros();
    let mut counts = vec![0u64; cfg.cells];
    for &w in &words[..cfg.samples] {
        counts[(w >> shift) as usize] += 1;
    }
    let fit = stats::chi2_uniform(&counts)?;
    let empty = counts.iter().filter(|&&c| c == 0).count();
    Ok(TestResult::new(
        TestId::Equidistribution.name(),
        cfg.samples as u64,
        fit.statistic,
        fit.dof as f64,
        fit.p,
        format!(
            "{} cells, {} samples, {} empty cell(s)",
            cfg.cells, cfg.samples, empty
        ),
    ))
}

// ---------------------------------------------------------------------------
// birthday spacings

/// Expected duplicate-spacing count m³ / (4·2^bits).
pub fn birthday_lambda(m: usize, bits: u32) -> f64 {
    let m = m as f64;
    m * m * m / (4.0 * 2f64.powi(bits as i32))
}

/// Sorts `birthdays` and counts spacing values equal to their predecessor
/// among the m - 1 sorted adjacent spacings (no wraparound spacing).
pub fn duplicate_spacings(birthdays: &mut [u64]) -> u32 {
    birthdays.sort_unstable();
    let mut spacings: Vec<u64> = birthdays.windows(2).map(|w| w[1] - w[0]).collect();
    spacings.sort_unstable();
    spacings.windows(2).filter(|w| w[0] == w[1]).count() as u32
}

/// Per-repetition duplicate counts.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthdayOutcome {
    pub duplicates: Vec<u32>,
    pub lambda: f64,
    pub words_consumed: u64,
}

impl BirthdayOutcome {
    pub fn mean(&self) -> f64 {
        self.duplicates.iter().map(|&j| f64::from(j)).sum::<f64>() / self.duplicates.len() as f64
    }
}

pub fn birthday_counts(
    words: &[u64],
    width: Width,
    cfg: &BirthdayConfig,
) -> Result<BirthdayOutcome, BatteryError> {
    if cfg.bits == 0 || cfg.bits > width.bits() || cfg.m < 2 {
        return Err(BatteryError::InvalidConfig(format!(
            "birthday spacings needs m >= 2 and 1 <= bits <= {} (m={}, bits={})",
            width.bits(),
            cfg.m,
            cfg.bits
        )));
    }
    let needed = (cfg.m * cfg.reps) as u64;
    require(words, needed)?;
    let shift = width.bits() - cfg.bits;
    let mut buf = vec![0u64; cfg.m];
    let duplicates = words[..needed as usize]
        .chunks_exact(cfg.m)
        .map(|chunk| {
            for (b, &w) in buf.iter_mut().zip(chunk) {
                *b = w >> shift;
            }
            duplicate_spacings(&mut buf)
        })
        .collect();
    Ok(BirthdayOutcome {
        duplicates,
        lambda: birthday_lambda(cfg.m, cfg.bits),
        words_consumed: needed,
    })
}

pub fn birthday_spacings(
    words: &[u64],
    width: Width,
    cfg: &BirthdayConfig,
) -> Result<TestResult, BatteryError> {
    let outcome = birthday_counts(words, width, cfg)?;
    let lambda = outcome.lambda;
    let top = (lambda + 8.0 * lambda.sqrt() + 8.0).ceil() as usize;
    let mut observed = vec![0u64; top + 1];
    for &j in &outcome.duplicates {
        observed[(j as usize).min(top)] += 1;
    }
    let mut probs: Vec<f64> = (0..top)
        .map(|k| stats::poisson_pmf(k as u64, lambda))
        .collect::<Result<_, _>>()?;
    let head: f64 = probs.iter().sum();
    probs.push((1.0 - head).max(0.0));
    let fit = stats::chi2_goodness_of_fit(&observed, &probs, 5.0)?;
    Ok(TestResult::new(
        TestId::BirthdaySpacings.name(),
        outcome.words_consumed,
        fit.statistic,
        lambda,
        fit.p,
        format!(
            "m={}, bits={}, reps={}, mean duplicates {:.4}, chi-squared dof {}",
            cfg.m,
            cfg.bits,
            cfg.reps,
            outcome.mean(),
            fit.dof
        ),
    ))
}

// ---------------------------------------------------------------------------
// 5-permutations

/// Lexicographic rank (Lehmer code) of the ordering of five values;
/// `None` when any two are equal.
pub fn permutation_rank(t: &[u64; 5]) -> Option<u8> {
    const WEIGHTS: [u8; 5] = [24, 6, 2, 1, 0];
    let mut rank = 0u8;
    for i in 0..5 {
        let mut smaller = 0u8;
        for j in (i + 1)..5 {
            if t[j] == t[i] {
                return None;
            }
            if t[j] < t[i] {
                smaller += 1;
            }
        }
        rank += smaller * WEIGHTS[i];
    }
    Some(rank)
}

/// Disjoint 5-tuples, so the 120 cell counts are multinomial and the plain
/// χ²(119) applies. Tied tuples are skipped and counted.
pub fn overlapping_permutations(
    words: &[u64],
    cfg: &Perm5Config,
) -> Result<TestResult, BatteryError> {
    let needed = 5 * cfg.tuples as u64;
    require(words, needed)?;
    let mut counts = [0u64; 120];
    let mut ties = 0u64;
    for chunk in words[..needed as usize].chunks_exact(5) {
        match permutation_rank(chunk.try_into().unwrap()) {
            Some(r) => counts[r as usize] += 1,
            None => ties += 1,
        }
    }
    let kept = cfg.tuples as u64 - ties;
    if kept == 0 {
        return Err(BatteryError::DegenerateInput(format!(
            "all {} tuples contain ties",
            cfg.tuples
        )));
    }
    let fit = stats::chi2_uniform(&counts)?;
    Ok(TestResult::new(
        TestId::OverlappingPermutations.name(),
        needed,
        fit.statistic,
        fit.dof as f64,
        fit.p,
        format!("disjoint variant, {kept} tuples kept, {ties} tied tuple(s) discarded"),
    ))
}

// ---------------------------------------------------------------------------
// craps

/// Probability of winning a game of craps.
pub const CRAPS_WIN_PROBABILITY: f64 = 244.0 / 495.0;
/// Throw-count bins: 1..=20 and a final "21 or more".
pub const CRAPS_THROW_BINS: usize = 21;

/// (point, ways to roll it) for the six point numbers.
const POINTS: [(u32, u32); 6] = [(4, 3), (5, 4), (6, 5), (8, 5), (9, 4), (10, 3)];

/// Exact distribution of throws per game over [`CRAPS_THROW_BINS`] bins.
pub fn craps_throw_distribution() -> [f64; CRAPS_THROW_BINS] {
    let mut dist = [0.0; CRAPS_THROW_BINS];
    dist[0] = 12.0 / 36.0;
    for &(_, ways) in &POINTS {
        let q = f64::from(ways) / 36.0;
        let r = f64::from(ways + 6) / 36.0;
        for (t, slot) in dist
            .iter_mut()
            .enumerate()
            .skip(1)
            .take(CRAPS_THROW_BINS - 2)
        {
            // t + 1 throws: come-out, then t - 1 misses and a decision
            *slot += q * (1.0 - r).powi(t as i32 - 1) * r;
        }
        dist[CRAPS_THROW_BINS - 1] += q * (1.0 - r).powi(CRAPS_THROW_BINS as i32 - 2);
    }
    dist
}

/// Mean and standard deviation of throws per game.
fn craps_throw_moments() -> (f64, f64) {
    let mut mean = 1.0;
    let mut second = 12.0 / 36.0;
    for &(_, ways) in &POINTS {
        let q = f64::from(ways) / 36.0;
        let r = f64::from(ways + 6) / 36.0;
        mean += q / r;
        second += q * (1.0 + 2.0 / r + (2.0 - r) / (r * r));
    }
    (mean, (second - mean * mean).sqrt())
}

/// Words reserved for `games` games: the mean plus six standard deviations
/// of the total throw count, two words per throw.
pub fn craps_words_needed(games: usize) -> u64 {
    let (mean, sd) = craps_throw_moments();
    let g = games as f64;
    2 * ((mean * g + 6.0 * sd * g.sqrt()).ceil() as u64 + 10)
}

/// floor(6·u) + 1 with u = word / 2^width, computed exactly.
pub fn die_face(word: u64, width: Width) -> u32 {
    ((u128::from(word) * 6) >> width.bits()) as u32 + 1
}

/// Plays one game; `None` if the dice run out mid-game.
/// Returns (won, throws).
pub fn play_craps<I: Iterator<Item = u64>>(dice: &mut I, width: Width) -> Option<(bool, u32)> {
    let mut roll = || -> Option<u32> {
        let a = die_face(dice.next()?, width);
        let b = die_face(dice.next()?, width);
        Some(a + b)
    };
    let first = roll()?;
    match first {
        7 | 11 => return Some((true, 1)),
        2 | 3 | 12 => return Some((false, 1)),
        _ => {}
    }
    let mut throws = 1;
    loop {
        let r = roll()?;
        throws += 1;
        if r == first {
            return Some((true, throws));
        }
        if r == 7 {
            return Some((false, throws));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrapsOutcome {
    pub games: usize,
    pub wins: u64,
    pub throw_histogram: [u64; CRAPS_THROW_BINS],
    pub words_consumed: u64,
    pub z: f64,
    pub p_wins: PValue,
    pub throws_statistic: f64,
    pub throws_dof: u64,
    pub p_throws: PValue,
}

impl CrapsOutcome {
    /// Šidák combination of the two sub-test p-values.
    pub fn combined_p(&self) -> PValue {
        let lo = self.p_wins.value().min(self.p_throws.value());
        PValue::new(1.0 - (1.0 - lo) * (1.0 - lo))
    }
}

pub fn craps_detail(
    words: &[u64],
    width: Width,
    cfg: &CrapsConfig,
) -> Result<CrapsOutcome, BatteryError> {
    let mut dice = words.iter().copied();
    let mut wins = 0u64;
    let mut hist = [0u64; CRAPS_THROW_BINS];
    let mut throws_total = 0u64;
    for played in 0..cfg.games {
        let Some((won, throws)) = play_craps(&mut dice, width) else {
            if words.len() as u64 >= craps_words_needed(cfg.games) {
                return Err(BatteryError::DiceExhausted {
                    played,
                    games: cfg.games,
                });
            }
            return Err(BatteryError::StreamExhausted {
                needed: craps_words_needed(cfg.games),
                available: words.len() as u64,
            });
        };
        wins += u64::from(won);
        throws_total += u64::from(throws);
        hist[(throws as usize - 1).min(CRAPS_THROW_BINS - 1)] += 1;
    }
    let n = cfg.games as f64;
    let p = CRAPS_WIN_PROBABILITY;
    let z = (wins as f64 - n * p) / (n * p * (1.0 - p)).sqrt();
    let fit = stats::chi2_goodness_of_fit(&hist, &craps_throw_distribution(), 5.0)?;
    Ok(CrapsOutcome {
        games: cfg.games,
        wins,
        throw_histogram: hist,
        words_consumed: 2 * throws_total,
        z,
        p_wins: stats::normal_tail_two_sided(z),
        throws_statistic: fit.statistic,
        throws_dof: fit.dof,
        p_throws: fit.p,
    })
}

pub fn craps(words: &[u64], width: Width, cfg: &CrapsConfig) -> Result<TestResult, BatteryError> {
    let o = craps_detail(words, width, cfg)?;
    Ok(TestResult::new(
        TestId::Craps.name(),
        o.words_consumed,
        o.throws_statistic,
        o.z,
        o.combined_p(),
        format!(
            "{} games, {} wins, p_wins={:.6e}, throws chi-squared dof {} p_throws={:.6e}",
            o.games,
            o.wins,
            o.p_wins.value(),
            o.throws_dof,
            o.p_throws.value()
        ),
    ))
}

// ---------------------------------------------------------------------------
// planning and orchestration

/// Smallest sample sizes a scaled-down test may run with.
pub mod floors {
    pub const MONOBIT_BITS: u64 = 64;
    pub const EQUIDIST_SAMPLES: usize = 10;
    pub const BIRTHDAY_REPS: usize = 20;
    pub const PERM5_TUPLES: usize = 600;
    pub const CRAPS_GAMES: usize = 100;
}

/// Words one run of `id` consumes (an upper bound for craps).
pub fn words_needed(id: TestId, cfg: &TestConfig, width: Width) -> u64 {
    match id {
        TestId::Monobit => cfg.monobit.bits.div_ceil(u64::from(width.bits())),
        TestId::Equidistribution => cfg.equidist.samples as u64,
        TestId::BirthdaySpacings => (cfg.birthday.m * cfg.birthday.reps) as u64,
        TestId::OverlappingPermutations => 5 * cfg.perm5.tuples as u64,
        TestId::Craps => craps_words_needed(cfg.craps.games),
    }
}

/// Shrinks `id`'s sample size so that one run fits in `words`; `Err` with a
/// reason when that would fall below the floor.
pub fn fit_to_words(
    id: TestId,
    cfg: &TestConfig,
    width: Width,
    words: u64,
) -> Result<TestConfig, String> {
    let mut out = *cfg;
    if words >= words_needed(id, cfg, width) {
        return Ok(out);
    }
    let too_small = |have: String, floor: String| {
        Err(format!(
            "budget too small: {have} available, floor is {floor}"
        ))
    };
    match id {
        TestId::Monobit => {
            let bits = words * u64::from(width.bits());
            if bits < floors::MONOBIT_BITS {
                return too_small(
                    format!("{bits} bits"),
                    format!("{} bits", floors::MONOBIT_BITS),
                );
            }
            out.monobit.bits = bits;
        }
        TestId::Equidistribution => {
            let samples = words as usize;
            if samples < floors::EQUIDIST_SAMPLES {
                return too_small(
                    format!("{samples} samples"),
                    format!("{} samples", floors::EQUIDIST_SAMPLES),
                );
            }
            let max_cells = 1usize << (samples / 5).ilog2();
            out.equidist.samples = samples;
            out.equidist.cells = cfg.equidist.cells.min(max_cells);
        }
        TestId::BirthdaySpacings => {
            let reps = words as usize / cfg.birthday.m;
            if reps < floors::BIRTHDAY_REPS {
                return too_small(
                    format!("{reps} repetitions"),
                    format!("{} repetitions", floors::BIRTHDAY_REPS),
                );
            }
            out.birthday.reps = reps;
        }
        TestId::OverlappingPermutations => {
            let tuples = words as usize / 5;
            if tuples < floors::PERM5_TUPLES {
                return too_small(
                    format!("{tuples} tuples"),
                    format!("{} tuples", floors::PERM5_TUPLES),
                );
            }
            out.perm5.tuples = tuples;
        }
        TestId::Craps => {
            // largest game count whose reservation fits
            let (mut lo, mut hi) = (0usize, cfg.craps.games);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if craps_words_needed(mid) <= words {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            if lo < floors::CRAPS_GAMES {
                return too_small(
                    format!("{lo} games"),
                    format!("{} games", floors::CRAPS_GAMES),
                );
            }
            out.craps.games = lo;
        }
    }
    Ok(out)
}

/// A test together with the configuration it will run with, or the reason
/// it will not run.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedTest {
    pub id: TestId,
    pub config: Result<TestConfig, String>,
}

impl PlannedTest {
    pub fn words(&self, width: Width) -> u64 {
        self.config
            .as_ref()
            .map(|c| words_needed(self.id, c, width))
            .unwrap_or(0)
    }
}

/// Decides per-test sample sizes for a stream that can deliver `available`
/// words (`None` = unlimited). Selected tests come back in execution order.
pub fn plan_battery(
    cfg: &TestConfig,
    selection: &[TestId],
    width: Width,
    available: Option<u64>,
) -> Vec<PlannedTest> {
    let selected: Vec<TestId> = TestId::ORDER
        .into_iter()
        .filter(|t| selection.contains(t))
        .collect();
    let reps = cfg.second_level_reps.max(1) as u64;
    let demand: Vec<u64> = selected
        .iter()
        .map(|&t| words_needed(t, cfg, width))
        .collect();
    let total = demand.iter().sum::<u64>().saturating_mul(reps);
    let per_rep = match available {
        Some(a) if a < total => a / reps,
        _ => {
            return selected
                .into_iter()
                .map(|id| PlannedTest {
                    id,
                    config: Ok(*cfg),
                })
                .collect()
        }
    };
    // floors first, in execution order, then the rest in proportion to
    // each admitted test's demand above its floor
    let floor: Vec<u64> = selected
        .iter()
        .map(|&t| floor_words(t, cfg, width))
        .collect();
    let mut remaining = per_rep;
    let mut offered = vec![0u64; selected.len()];
    let mut admitted = vec![false; selected.len()];
    for i in 0..selected.len() {
        offered[i] = remaining;
        if floor[i] <= remaining {
            admitted[i] = true;
            remaining -= floor[i];
        }
    }
    let extra: u64 = (0..selected.len())
        .filter(|&i| admitted[i])
        .map(|i| demand[i].saturating_sub(floor[i]))
        .sum();
    selected
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let words = if admitted[i] && extra > 0 {
                let share = u128::from(remaining) * u128::from(demand[i].saturating_sub(floor[i]))
                    / u128::from(extra);
                floor[i] + share as u64
            } else {
                offered[i]
            };
            PlannedTest {
                id,
                config: fit_to_words(id, cfg, width, words),
            }
        })
        .collect()
}

/// Words a run at the floor sample size consumes.
fn floor_words(id: TestId, cfg: &TestConfig, width: Width) -> u64 {
    match id {
        TestId::Monobit => floors::MONOBIT_BITS.div_ceil(u64::from(width.bits())),
        TestId::Equidistribution => floors::EQUIDIST_SAMPLES as u64,
        TestId::BirthdaySpacings => (cfg.birthday.m * floors::BIRTHDAY_REPS) as u64,
        TestId::OverlappingPermutations => 5 * floors::PERM5_TUPLES as u64,
        TestId::Craps => craps_words_needed(floors::CRAPS_GAMES),
    }
}

fn run_one(
    id: TestId,
    cfg: &TestConfig,
    words: &[u64],
    width: Width,
) -> Result<TestResult, BatteryError> {
    match id {
        TestId::Monobit => monobit(words, width, &cfg.monobit),
        TestId::Equidistribution => equidistribution(words, width, &cfg.equidist),
        TestId::BirthdaySpacings => birthday_spacings(words, width, &cfg.birthday),
        TestId::OverlappingPermutations => overlapping_permutations(words, &cfg.perm5),
        TestId::Craps => craps(words, width, &cfg.craps),
    }
}

/// Runs the selected tests over `stream` and assembles the report.
///
/// Only configuration and I/O problems are errors; a test that cannot run
/// (short stream, degenerate data) is recorded as not run.
pub fn run_battery(
    stream: &mut WordStream,
    cfg: &TestConfig,
    selection: &[TestId],
    descriptor: &str,
) -> Result<BatteryReport, BatteryError> {
    if selection.is_empty() {
        return Err(BatteryError::InvalidConfig("no tests selected".into()));
    }
    let width = stream.width();
    cfg.validate(width)?;
    let plan = plan_battery(cfg, selection, width, stream.available_words());
    let reps = cfg.second_level_reps.max(1);
    let second_level = cfg.second_level_reps > 0;

    let mut results = Vec::new();
    let mut not_run = Vec::new();
    let mut p_values: Vec<Vec<f64>> = vec![Vec::new(); plan.len()];

    for rep in 0..reps {
        let label = |id: TestId| {
            if second_level {
                format!("{}[{}]", id.name(), rep + 1)
            } else {
                id.name().to_string()
            }
        };
        let mut jobs: Vec<(usize, TestId, TestConfig, Vec<u64>)> = Vec::new();
        for (slot, planned) in plan.iter().enumerate() {
            let config = match &planned.config {
                Ok(c) => c,
                Err(reason) => {
                    if rep == 0 {
                        not_run.push((
                            slot,
                            rep,
                            NotRun {
                                test_name: planned.id.name().to_string(),
                                reason: reason.clone(),
                            },
                        ));
                    }
                    continue;
                }
            };
            let needed = planned.words(width);
            let words = if stream.is_exhausted() {
                Vec::new()
            } else {
                stream.next_words(needed as usize)?
            };
            // craps reserves a margin it rarely uses; only a real shortfall counts
            let short = (words.len() as u64) < needed && planned.id != TestId::Craps;
            if short || words.is_empty() {
                not_run.push((
                    slot,
                    rep,
                    NotRun {
                        test_name: label(planned.id),
                        reason: format!(
                            "stream exhausted: needed {needed} words, got {}",
                            words.len()
                        ),
                    },
                ));
                continue;
            }
            jobs.push((slot, planned.id, *config, words));
        }

        let outcomes: Vec<(usize, TestId, Result<TestResult, BatteryError>)> = jobs
            .par_iter()
            .map(|(slot, id, c, words)| (*slot, *id, run_one(*id, c, words, width)))
            .collect();
        let mut rep_results: Vec<(usize, TestResult)> = Vec::new();
        for (slot, id, outcome) in outcomes {
            match outcome {
                Ok(mut r) => {
                    r.test_name = label(id);
                    p_values[slot].push(r.p.value());
                    rep_results.push((slot, r));
                }
                Err(e) => not_run.push((
                    slot,
                    rep,
                    NotRun {
                        test_name: label(id),
                        reason: e.to_string(),
                    },
                )),
            }
        }
        results.extend(rep_results.into_iter().map(|(slot, r)| (slot, rep, r)));
    }

    if second_level {
        for (slot, planned) in plan.iter().enumerate() {
            if planned.config.is_err() {
                continue;
            }
            let name = format!("{}:ks", planned.id.name());
            match stats::ks_uniform(&p_values[slot]) {
                Ok(ks) => results.push((
                    slot,
                    reps,
                    TestResult::new(
                        &name,
                        0,
                        ks.statistic,
                        p_values[slot].len() as f64,
                        ks.p,
                        format!("KS uniformity of {} p-value(s)", p_values[slot].len()),
                    ),
                )),
                Err(e) => not_run.push((
                    slot,
                    reps,
                    NotRun {
                        test_name: name,
                        reason: e.to_string(),
                    },
                )),
            }
        }
    }

    // repetition-major for results; tests in fixed order within each
    results.sort_by_key(|(slot, rep, _)| (*rep, *slot));
    not_run.sort_by_key(|(slot, rep, _)| (*rep, *slot));
    let warnings = stream.warnings().iter().map(|w| w.to_string()).collect();
    Ok(BatteryReport::assemble(
        descriptor.to_string(),
        stream.words_read(),
        results.into_iter().map(|(_, _, r)| r).collect(),
        not_run.into_iter().map(|(_, _, n)| n).collect(),
        warnings,
    ))
}
