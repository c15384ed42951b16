//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Straight port of the reference C implementation (init_genrand /
/// genrand_int32), kept deliberately close to the original layout.
pub struct MtReference {
    mt: [u32; 624],
    mti: usize,
}

impl MtReference {
    pub fn new(s: u32) -> Self {
        let mut mt = [0u32; 624];
        mt[0] = s;
        for i in 1..624 {
            mt[i] = 1812433253u32
                .wrapping_mul(mt[i - 1] ^ (mt[i - 1] >> 30))
                .wrapping_add(i as u32);
        }
        MtReference { mt, mti: 624 }
    }

    pub fn genrand_int32(&mut self) -> u32 {
        const N: usize = 624;
        const M: usize = 397;
        const MATRIX_A: u32 = 0x9908b0df;
        const UPPER_MASK: u32 = 0x80000000;
        const LOWER_MASK: u32 = 0x7fffffff;
        let mag01 = [0u32, MATRIX_A];
        if self.mti >= N {
            let mut kk = 0;
            while kk < N - M {
                let y = (self.mt[kk] & UPPER_MASK) | (self.mt[kk + 1] & LOWER_MASK);
                self.mt[kk] = self.mt[kk + M] ^ (y >> 1) ^ mag01[(y & 1) as usize];
                kk += 1;
            }
            while kk < N - 1 {
                let y = (self.mt[kk] & UPPER_MASK) | (self.mt[kk + 1] & LOWER_MASK);
                self.mt[kk] = self.mt[kk + M - N] ^ (y >> 1) ^ mag01[(y & 1) as usize];
                kk += 1;
            }
            let y = (self.mt[N - 1] & UPPER_MASK) | (self.mt[0] & LOWER_MASK);
            self.mt[N - 1] = self.mt[M - 1] ^ (y >> 1) ^ mag01[(y & 1) as usize];
            self.mti = 0;
        }
        let mut y = self.mt[self.mti];
        self.mti += 1;
        y ^= y >> 11;
        y ^= (y << 7) & 0x9d2c5680;
        y ^= (y << 15) & 0xefc60000;
        y ^= y >> 18;
        y
    }
}

/// PCG32 (XSH-RR) stepped by hand from the published algorithm.
pub fn pcg32_reference(initstate: u64, initseq: u64, count: usize) -> Vec<u32> {
    const MULT: u64 = 6364136223846793005;
    let inc = (initseq << 1) | 1;
    let mut state = 0u64;
    let step = |s: u64| s.wrapping_mul(MULT).wrapping_add(inc);
    state = step(state);
    state = state.wrapping_add(initstate);
    state = step(state);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let old = state;
        state = step(state);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        out.push(xorshifted.rotate_right(rot));
    }
    out
}

pub fn xorshift64star_reference(seed: u64, count: usize) -> Vec<u64> {
    let mut x = seed;
    (0..count)
        .map(|_| {
            x ^= x >> 12;
            x ^= x << 25;
            x ^= x >> 27;
            x.wrapping_mul(2685821657736338717)
        })
        .collect()
}

/// Two-sided KS statistic of `samples` against Uniform(0, 1).
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Exact P(D_n >= d) for n uniform samples, by dynamic programming over
/// the empirical count at the boundary points where D_n <= d can break.
///
/// D_n <= d iff for every i the i-th order statistic lies in
/// [i/n - d, (i-1)/n + d]; equivalently the number of samples below
/// i/n - d is at most i-1 and the number below (i-1)/n + d is at least i.
pub fn ks_exact_tail(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    // (point, max allowed count, min required count)
    let mut points: Vec<(f64, usize, usize)> = Vec::new();
    for i in 1..=n {
        let a = i as f64 / n as f64 - d;
        if a > 0.0 && a < 1.0 {
            points.push((a, i - 1, 0));
        }
        let b = (i - 1) as f64 / n as f64 + d;
        if b > 0.0 && b < 1.0 {
            points.push((b, n, i));
        }
    }
    points.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let ln_choose = |n: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for j in 0..k {
            s += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        }
        s
    };
    // prob[l] = P(count of samples <= current point is l, constraints so far hold)
    let mut prob = vec![0.0f64; n + 1];
    prob[0] = 1.0;
    let mut prev = 0.0f64;
    for &(c, max_count, min_count) in &points {
        let q = if prev >= 1.0 {
            0.0
        } else {
            ((c - prev) / (1.0 - prev)).clamp(0.0, 1.0)
        };
        let mut next = vec![0.0f64; n + 1];
        for (l, &pl) in prob.iter().enumerate() {
            if pl == 0.0 {
                continue;
            }
            let rest = n - l;
            for k in 0..=rest {
                let w = if q == 0.0 {
                    if k == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if q == 1.0 {
                    if k == rest {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (ln_choose(rest, k) + k as f64 * q.ln() + (rest - k) as f64 * (1.0 - q).ln())
                        .exp()
                };
                next[l + k] += pl * w;
            }
        }
        for (l, v) in next.iter_mut().enumerate() {
            if l > max_count || l < min_count {
                *v = 0.0;
            }
        }
        prob = next;
        prev = c;
    }
    let within: f64 = prob.iter().sum();
    (1.0 - within).clamp(0.0, 1.0)
}

fn ways(sum: u32) -> u32 {
    6 - (7i32 - sum as i32).unsigned_abs()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Win probability by enumerating all 36 come-out rolls; a point p is then
/// made with probability ways(p) / (ways(p) + 6).
pub fn craps_win_probability_exact() -> BigRational {
    let mut total = BigRational::zero();
    for a in 1..=6u32 {
        for b in 1..=6u32 {
            let s = a + b;
            let win = match s {
                7 | 11 => BigRational::one(),
                2 | 3 | 12 => BigRational::zero(),
                p => rat(ways(p) as i64, ways(p) as i64 + 6),
            };
            total += win * rat(1, 36);
        }
    }
    total
}

/// Distribution of throws per game over bins 1..=20 and ">= 21", by
/// running the point phase as a Markov chain in exact arithmetic.
pub fn craps_throws_exact() -> Vec<BigRational> {
    let mut bins = vec![BigRational::zero(); 21];
    // mass still in play, per point, after t throws
    let mut alive: Vec<(BigRational, BigRational)> = Vec::new();
    for p in [4u32, 5, 6, 8, 9, 10] {
        let end = rat(ways(p) as i64 + 6, 36);
        alive.push((rat(ways(p) as i64, 36), end));
    }
    bins[0] = rat(12, 36);
    for t in 2..=20 {
        for (mass, end) in alive.iter_mut() {
            bins[t - 1] += mass.clone() * end.clone();
            *mass = mass.clone() * (BigRational::one() - end.clone());
        }
    }
    let head: BigRational = bins[..20]
        .iter()
        .cloned()
        .fold(BigRational::zero(), |a, b| a + b);
    bins[20] = BigRational::one() - head;
    bins
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Brute force: all pairs of sorted adjacent spacings, counting every
/// spacing that has an equal spacing earlier in sorted order.
pub fn brute_force_duplicates(birthdays: &[u64]) -> u32 {
    let mut b = birthdays.to_vec();
    b.sort();
    let spacings: Vec<u64> = b.windows(2).map(|w| w[1] - w[0]).collect();
    let mut dup = 0;
    for i in 0..spacings.len() {
        // a spacing counts once for each earlier equal value it repeats
        if (0..i).any(|j| spacings[j] == spacings[i]) {
            dup += 1;
        }
    }
    dup
}
