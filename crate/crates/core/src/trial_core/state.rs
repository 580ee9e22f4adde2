use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm. Serialized as the integers 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub fn number(self) -> u8 {
        match self {
            Group::One => 1,
            Group::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Group::One),
            2 => Some(Group::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Group::One => Group::Two,
            Group::Two => Group::One,
        }
    }

    /// Binary encoding: 1 for group one, 0 for group two.
    pub fn indicator(self) -> u8 {
        match self {
            Group::One => 1,
            Group::Two => 0,
        }
    }

    fn index(self) -> usize {
        match self {
            Group::One => 0,
            Group::Two => 1,
        }
    }
}

impl Serialize for Group {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Group {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        Group::from_number(n).ok_or_else(|| serde::de::Error::custom(format!("group must be 1 or 2, got {n}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub raw: Vec<f64>,
    /// Covariates on the z-scale the methods operate on.
    pub standardized: Vec<f64>,
    /// Quantile categories in `1..=c`, present once discretized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<u32>>,
}

impl Subject {
    pub fn new(id: impl Into<String>, raw: Vec<f64>, standardized: Vec<f64>) -> Self {
        assert_eq!(raw.len(), standardized.len(), "raw and standardized lengths differ");
        Self {
            id: id.into(),
            raw,
            standardized,
            categories: None,
        }
    }

    /// A subject whose raw values are already on the working scale.
    pub fn on_scale(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self::new(id, values.clone(), values)
    }

    pub fn with_categories(mut self, categories: Vec<u32>) -> Self {
        assert_eq!(categories.len(), self.raw.len(), "category vector length differs");
        self.categories = Some(categories);
        self
    }

    pub fn p(&self) -> usize {
        self.raw.len()
    }
}

/// Counts `n_{jlk}` of allocated subjects per covariate, category and group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    p: usize,
    c: usize,
    counts: Vec<u32>,
}

impl CategoryCounts {
    pub fn new(p: usize, c: usize) -> Self {
        Self {
            p,
            c,
            counts: vec![0; p * c * 2],
        }
    }

    fn slot(&self, j: usize, level: u32, group: Group) -> usize {
        debug_assert!(level >= 1 && (level as usize) <= self.c);
        (j * self.c + (level as usize - 1)) * 2 + group.index()
    }

    pub fn get(&self, j: usize, level: u32, group: Group) -> u32 {
        self.counts[self.slot(j, level, group)]
    }

    pub fn add(&mut self, categories: &[u32], group: Group) {
        for (j, &level) in categories.iter().enumerate() {
            let s = self.slot(j, level, group);
            self.counts[s] += 1;
        }
    }

    pub fn n_categories(&self) -> usize {
        self.c
    }

    pub fn total_for(&self, j: usize) -> u32 {
        self.counts[j * self.c * 2..(j + 1) * self.c * 2].iter().sum()
    }

    fn swapped(&self) -> Self {
        let mut out = self.clone();
        for pair in out.counts.chunks_exact_mut(2) {
            pair.swap(0, 1);
        }
        out
    }
}

/// Allocation history of one trial.
///
/// Only [`TrialState::assign`] mutates a state, which keeps `n1 + n2`, the
/// assignment list and the category counts consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    p: usize,
    target_n: usize,
    assignments: Vec<(Subject, Group)>,
    n1: usize,
    n2: usize,
    category_counts: Option<CategoryCounts>,
}

impl TrialState {
    pub fn new(p: usize, target_n: usize) -> Self {
        Self {
            p,
            target_n,
            assignments: Vec::new(),
            n1: 0,
            n2: 0,
            category_counts: None,
        }
    }

    /// A state that tracks category counts for `c` quantile categories.
    pub fn with_categories(p: usize, target_n: usize, c: usize) -> Self {
        Self {
            category_counts: Some(CategoryCounts::new(p, c)),
            ..Self::new(p, target_n)
        }
    }

    /// Rebuild a state from an ordered list of allocations.
    pub fn from_assignments(
        p: usize,
        target_n: usize,
        categories: Option<usize>,
        assignments: impl IntoIterator<Item = (Subject, Group)>,
    ) -> Result<Self> {
        let mut state = match categories {
            Some(c) => Self::with_categories(p, target_n, c),
            None => Self::new(p, target_n),
        };
        for (s, g) in assignments {
            state.push(s, g)?;
        }
        Ok(state)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn target_n(&self) -> usize {
        self.target_n
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn size(&self, g: Group) -> usize {
        match g {
            Group::One => self.n1,
            Group::Two => self.n2,
        }
    }

    pub fn allocated(&self) -> usize {
        self.assignments.len()
    }

    /// 1-based index of the next subject.
    pub fn step(&self) -> usize {
        self.assignments.len() + 1
    }

    pub fn is_full(&self) -> bool {
        self.assignments.len() >= self.target_n
    }

    pub fn assignments(&self) -> &[(Subject, Group)] {
        &self.assignments
    }

    pub fn category_counts(&self) -> Option<&CategoryCounts> {
        self.category_counts.as_ref()
    }

    pub fn members(&self, g: Group) -> impl Iterator<Item = &Subject> {
        self.assignments.iter().filter(move |(_, k)| *k == g).map(|(s, _)| s)
    }

    /// Standardized covariate vectors of one group, in allocation order.
    pub fn group_rows(&self, g: Group) -> Vec<Vec<f64>> {
        self.members(g).map(|s| s.standardized.clone()).collect()
    }

    pub fn groups(&self) -> Vec<Group> {
        self.assignments.iter().map(|(_, g)| *g).collect()
    }

    fn push(&mut self, subject: Subject, group: Group) -> Result<()> {
        if self.is_full() {
            return Err(Error::TrialFull(self.assignments.len()));
        }
        if subject.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: subject.p(),
            });
        }
        if let Some(counts) = self.category_counts.as_mut() {
            let cats = subject
                .categories
                .as_ref()
                .ok_or_else(|| Error::MissingCategories(subject.id.clone()))?;
            if cats.iter().any(|&l| l < 1 || l as usize > counts.n_categories()) {
                return Err(Error::InvalidMatrix(format!(
                    "subject {} has a category outside 1..={}",
                    subject.id,
                    counts.n_categories()
                )));
            }
            counts.add(cats, group);
        }
        match group {
            Group::One => self.n1 += 1,
            Group::Two => self.n2 += 1,
        }
        self.assignments.push((subject, group));
        Ok(())
    }

    /// New state with `subject` appended to `group`.
    pub fn assign(&self, subject: Subject, group: Group) -> Result<Self> {
        let mut next = self.clone();
        next.push(subject, group)?;
        Ok(next)
    }

    /// In-place variant of [`assign`](Self::assign) for drivers that own the state.
    pub fn assign_mut(&mut self, subject: Subject, group: Group) -> Result<()> {
        self.push(subject, group)
    }

    /// The same history with group labels exchanged.
    pub fn label_swapped(&self) -> Self {
        Self {
            p: self.p,
            target_n: self.target_n,
            assignments: self.assignments.iter().map(|(s, g)| (s.clone(), g.other())).collect(),
            n1: self.n2,
            n2: self.n1,
            category_counts: self.category_counts.as_ref().map(CategoryCounts::swapped),
        }
    }
}

/// Mean, sample SD and size of every covariate in one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub means: Vec<f64>,
    /// Sample SDs (`n - 1` divisor); 0 when `n <= 1`.
    pub sds: Vec<f64>,
}

/// Sample mean and SD of `values`, with SD 0 for fewer than two values.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl GroupStats {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>, p: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (m, s) = mean_sd(&col);
            means.push(m);
            sds.push(s);
        }
        Self {
            n: rows.len(),
            means,
            sds,
        }
    }

    pub fn of_group(state: &TrialState, g: Group) -> Self {
        Self::from_rows(state.members(g).map(|s| s.standardized.as_slice()), state.p())
    }
}
