//! One-vs-rest RBF support vector machines trained by SMO.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::key::seed_stream;

/// Image state, as assigned by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    /// Clean watermarked image, or recompressed at QF 100.
    Clean = 1,
    /// JPEG recompression at QF 75..95 only.
    Unintentional = 2,
    /// Content tampering, optionally followed by QF 100.
    Intentional = 3,
    /// Content tampering followed by JPEG at QF 75..95.
    Both = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Clean,
        ClassLabel::Unintentional,
        ClassLabel::Intentional,
        ClassLabel::Both,
    ];

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(ClassLabel::Clean),
            "2" => Ok(ClassLabel::Unintentional),
            "3" => Ok(ClassLabel::Intentional),
            "4" => Ok(ClassLabel::Both),
            other => Err(Error::domain(format!(
                "class label must be 1..=4, got {other:?}"
            ))),
        }
    }
}

/// Per-feature z-score normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        // Constant features would divide by zero; leave them centered only.
        let std = std
            .into_iter()
            .map(|s| {
                let s = (s / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// A trained binary machine: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    pub gamma: f64,
    pub bias: f64,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub support: Vec<Vec<f64>>,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(&self.support)
            .map(|(c, sv)| c * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// KKT tolerance of the SMO stopping rule.
pub const SMO_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Soft-margin SVM dual solved by SMO with maximal-violating-pair working
/// set selection. `y` holds +1/-1. Ties in the selection go to the lowest
/// index, so the result is deterministic.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> BinaryMachine {
    let n = x.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf(gamma, &x[i], &x[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let max_iter = (100 * n).max(1_000_000);
    for _ in 0..max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < SMO_TOLERANCE {
            break;
        }

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho: average over free vectors, else midpoint of the feasible range.
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut coef = Vec::new();
    let mut support = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            coef.push(alpha[t] * y[t]);
            support.push(x[t].clone());
        }
    }
    BinaryMachine {
        gamma,
        bias: -rho,
        coef,
        support,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub dim: usize,
    pub c: f64,
    pub gamma: f64,
    pub normalizer: Normalizer,
    /// One machine per class seen in training, in class order.
    pub machines: Vec<(ClassLabel, BinaryMachine)>,
}

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_GAMMA: f64 = 1.0 / 7.0;

pub fn train(samples: &[(Vec<f64>, ClassLabel)], c: f64, gamma: f64) -> Result<ClassifierModel> {
    if !(c > 0.0 && c.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Training(format!(
            "C and gamma must be positive, got C = {c}, gamma = {gamma}"
        )));
    }
    let dim = samples.first().map_or(0, |s| s.0.len());
    if dim == 0 || samples.iter().any(|s| s.0.len() != dim) {
        return Err(Error::Training(
            "samples must share a non-zero feature count".into(),
        ));
    }
    let mut counts = [0usize; 4];
    for (_, l) in samples {
        counts[l.index()] += 1;
    }
    let present: Vec<ClassLabel> = ClassLabel::ALL
        .into_iter()
        .filter(|l| counts[l.index()] > 0)
        .collect();
    if let Some(l) = present.iter().find(|l| counts[l.index()] < 2) {
        return Err(Error::Training(format!(
            "class {l} has {} sample(s), at least 2 are required",
            counts[l.index()]
        )));
    }
    if present.len() < 2 {
        return Err(Error::Training("at least two classes are required".into()));
    }

    let rows: Vec<&[f64]> = samples.iter().map(|s| s.0.as_slice()).collect();
    let normalizer = Normalizer::fit(&rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| normalizer.apply(r)).collect();
    let machines = present
        .iter()
        .map(|&class| {
            let y: Vec<f64> = samples
                .iter()
                .map(|s| if s.1 == class { 1.0 } else { -1.0 })
                .collect();
            (class, train_binary(&x, &y, c, gamma))
        })
        .collect();
    Ok(ClassifierModel {
        dim,
        c,
        gamma,
        normalizer,
        machines,
    })
}

impl ClassifierModel {
    pub fn decision_values(&self, features: &[f64]) -> Result<Vec<(ClassLabel, f64)>> {
        if features.len() != self.dim {
            return Err(Error::domain(format!(
                "model expects {} features, got {}",
                self.dim,
                features.len()
            )));
        }
        let z = self.normalizer.apply(features);
        Ok(self
            .machines
            .iter()
            .map(|(l, m)| (*l, m.decision(&z)))
            .collect())
    }

    /// Class with the largest decision value; ties go to the lowest class.
    pub fn predict(&self, features: &[f64]) -> Result<ClassLabel> {
        let scores = self.decision_values(features)?;
        Ok(argmax(&scores))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let num = |v: f64| format!("{v:.16e}");
        let list = |v: &[f64]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ");
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "c {}", num(self.c))?;
        writeln!(w, "gamma {}", num(self.gamma))?;
        writeln!(w, "mean {}", list(&self.normalizer.mean))?;
        writeln!(w, "std {}", list(&self.normalizer.std))?;
        writeln!(w, "machines {}", self.machines.len())?;
        for (label, m) in &self.machines {
            writeln!(w, "machine {label}")?;
            writeln!(w, "gamma {}", num(m.gamma))?;
            writeln!(w, "bias {}", num(m.bias))?;
            writeln!(w, "support {}", m.coef.len())?;
            for (c, sv) in m.coef.iter().zip(&m.support) {
                writeln!(w, "{} {}", num(*c), list(sv))?;
            }
        }
        writeln!(w, "end")
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is ASCII")
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        ModelParser::new(r).parse()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }
}

fn argmax(scores: &[(ClassLabel, f64)]) -> ClassLabel {
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 || (s.1 == best.1 && s.0 < best.0) {
            best = s;
        }
    }
    best.0
}

pub const MODEL_HEADER: &str = "sealkit-svm v1";

struct ModelParser<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> ModelParser<R> {
    fn new(r: R) -> Self {
        ModelParser {
            lines: r.lines(),
            line_no: 0,
        }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            format: "model",
            path: "<model>".into(),
            reason: format!("line {}: {}", self.line_no, reason.into()),
        }
    }

    fn line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.err(e.to_string())),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let line = self.line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`, found {line:?}")));
        }
        Ok(parts.map(str::to_owned).collect())
    }

    fn floats(&self, vals: &[String]) -> Result<Vec<f64>> {
        vals.iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number {v:?}")))
            })
            .collect()
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let vals = self.keyed(key)?;
        match vals.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| self.err(format!("bad value for `{key}`: {v:?}"))),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn parse(mut self) -> Result<ClassifierModel> {
        let header = self.line()?;
        if header.trim() != MODEL_HEADER {
            return Err(self.err(format!("expected header {MODEL_HEADER:?}")));
        }
        let dim: usize = self.scalar("dim")?;
        let c: f64 = self.scalar("c")?;
        let gamma: f64 = self.scalar("gamma")?;
        let v = self.keyed("mean")?;
        let mean = self.floats(&v)?;
        let v = self.keyed("std")?;
        let std = self.floats(&v)?;
        if mean.len() != dim || std.len() != dim {
            return Err(self.err("normalization length does not match dim"));
        }
        let count: usize = self.scalar("machines")?;
        let mut machines = Vec::with_capacity(count);
        for _ in 0..count {
            let label: ClassLabel = self.scalar::<String>("machine")?.parse()?;
            let gamma: f64 = self.scalar("gamma")?;
            let bias: f64 = self.scalar("bias")?;
            let n: usize = self.scalar("support")?;
            let mut coef = Vec::with_capacity(n);
            let mut support = Vec::with_capacity(n);
            for _ in 0..n {
                let line = self.line()?;
                let vals: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
                let nums = self.floats(&vals)?;
                if nums.len() != dim + 1 {
                    return Err(self.err(format!("support row needs {} numbers", dim + 1)));
                }
                coef.push(nums[0]);
                support.push(nums[1..].to_vec());
            }
            machines.push((
                label,
                BinaryMachine {
                    gamma,
                    bias,
                    coef,
                    support,
                },
            ));
        }
        self.keyed("end")?;
        Ok(ClassifierModel {
            dim,
            c,
            gamma,
            normalizer: Normalizer { mean, std },
            machines,
        })
    }
}

/// Confusion matrix and derived rates; `confusion[pred][truth]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub confusion: [[usize; 4]; 4],
}

impl CvReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hit: usize = (0..4).map(|i| self.confusion[i][i]).sum();
        hit as f64 / self.total().max(1) as f64
    }

    /// Correct predictions of a class over all predictions of it; `None`
    /// when the class was never predicted.
    pub fn precision(&self, class: ClassLabel) -> Option<f64> {
        let i = class.index();
        let predicted: usize = self.confusion[i].iter().sum();
        (predicted > 0).then(|| self.confusion[i][i] as f64 / predicted as f64)
    }

    /// Correct predictions of a class over its true instances; `None` when
    /// the class does not occur.
    pub fn recall(&self, class: ClassLabel) -> Option<f64> {
        let i = class.index();
        let actual: usize = (0..4).map(|p| self.confusion[p][i]).sum();
        (actual > 0).then(|| self.confusion[i][i] as f64 / actual as f64)
    }
}

impl fmt::Display for CvReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        writeln!(
            f,
            "accuracy: {:.2}% ({} folds)",
            100.0 * self.accuracy(),
            self.folds
        )?;
        writeln!(
            f,
            "{:>8} {:>7} {:>7} {:>7} {:>7} {:>10}",
            "", "true 1", "true 2", "true 3", "true 4", "precision"
        )?;
        for class in ClassLabel::ALL {
            let row = &self.confusion[class.index()];
            writeln!(
                f,
                "{:>8} {:>7} {:>7} {:>7} {:>7} {:>10}",
                format!("pred {class}"),
                row[0],
                row[1],
                row[2],
                row[3],
                pct(self.precision(class))
            )?;
        }
        write!(f, "{:>8}", "recall")?;
        for class in ClassLabel::ALL {
            write!(f, " {:>7}", pct(self.recall(class)))?;
        }
        writeln!(f)
    }
}

/// Stratified k-fold cross-validation. Samples are grouped by class, each
/// class is shuffled with a stream seeded by `seed`, and the result is dealt
/// round-robin into the folds, so every fold sees every class in proportion.
pub fn cross_validate(
    samples: &[(Vec<f64>, ClassLabel)],
    folds: usize,
    c: f64,
    gamma: f64,
    seed: u64,
) -> Result<CvReport> {
    if folds < 2 || samples.len() < folds {
        return Err(Error::Training(format!(
            "{folds}-fold cross-validation needs at least {folds} samples (have {})",
            samples.len()
        )));
    }
    // Each class is shuffled before dealing so that a periodic sample order
    // (e.g. a fixed variant grid per source) cannot line up with the folds.
    let mut stream = seed_stream(seed);
    let mut fold_of = vec![0usize; samples.len()];
    let mut dealt = 0usize;
    for class in ClassLabel::ALL {
        let members: Vec<usize> = (0..samples.len())
            .filter(|&i| samples[i].1 == class)
            .collect();
        for k in stream.permutation(members.len()) {
            fold_of[members[k]] = dealt % folds;
            dealt += 1;
        }
    }

    let mut confusion = [[0usize; 4]; 4];
    for fold in 0..folds {
        let train_set: Vec<(Vec<f64>, ClassLabel)> = samples
            .iter()
            .zip(&fold_of)
            .filter(|(_, &f)| f != fold)
            .map(|(s, _)| s.clone())
            .collect();
        let model = train(&train_set, c, gamma)?;
        for (s, _) in samples.iter().zip(&fold_of).filter(|(_, &f)| f == fold) {
            let pred = model.predict(&s.0)?;
            confusion[pred.index()][s.1.index()] += 1;
        }
    }
    Ok(CvReport { folds, confusion })
}
