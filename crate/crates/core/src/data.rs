//! Observed data: outcome, mediators, treatment and confounders.
//!
//! The covariate vector `x` of a subject is the concatenation
//! `(a, l_disc, l_cont)`, so its first `1 + p1` coordinates are binary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

impl VarKind {
    pub fn is_binary(self) -> bool {
        matches!(self, VarKind::Binary)
    }
}

/// Shape and variable kinds of a dataset; everything the model needs that is
/// not the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub y_kind: VarKind,
    pub m_kinds: Vec<VarKind>,
    pub p1: usize,
    pub p2: usize,
}

impl Layout {
    pub fn q(&self) -> usize {
        self.m_kinds.len()
    }

    /// Length of `x = (a, l_disc, l_cont)`.
    pub fn x_dim(&self) -> usize {
        1 + self.p1 + self.p2
    }

    /// Number of binary coordinates of `x`, treatment included.
    pub fn x_binary(&self) -> usize {
        1 + self.p1
    }

    /// Outcome design `(1, x, m)`.
    pub fn outcome_dim(&self) -> usize {
        1 + self.x_dim() + self.q()
    }

    /// Mediator design `(1, x)`.
    pub fn mediator_dim(&self) -> usize {
        1 + self.x_dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub y: String,
    pub a: String,
    pub m: Vec<String>,
    pub l_disc: Vec<String>,
    pub l_cont: Vec<String>,
}

impl ColumnNames {
    pub fn default_for(q: usize, p1: usize, p2: usize) -> Self {
        ColumnNames {
            y: "y".into(),
            a: "a".into(),
            m: (1..=q).map(|k| format!("m{k}")).collect(),
            l_disc: (1..=p1).map(|k| format!("l{k}")).collect(),
            l_cont: (p1 + 1..=p1 + p2).map(|k| format!("l{k}")).collect(),
        }
    }
}

/// Column-major data table. Mediator and confounder matrices are stored as
/// one `Vec` per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub y_kind: VarKind,
    pub m: Vec<Vec<f64>>,
    pub m_kinds: Vec<VarKind>,
    pub a: Vec<f64>,
    pub l_disc: Vec<Vec<f64>>,
    pub l_cont: Vec<Vec<f64>>,
    pub names: ColumnNames,
}

fn check_column(name: &str, col: &[f64], n: usize, binary: bool) -> Result<()> {
    if col.len() != n {
        return Err(Error::InvalidData(format!("column {name} has length {} but n = {n}", col.len())));
    }
    for (i, v) in col.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidData(format!("column {name}, row {}: missing or non-finite value", i + 1)));
        }
        if binary && *v != 0.0 && *v != 1.0 {
            return Err(Error::InvalidData(format!("column {name}, row {}: value {v} is not binary", i + 1)));
        }
    }
    Ok(())
}

impl Dataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        y: Vec<f64>,
        y_kind: VarKind,
        m: Vec<Vec<f64>>,
        m_kinds: Vec<VarKind>,
        a: Vec<f64>,
        l_disc: Vec<Vec<f64>>,
        l_cont: Vec<Vec<f64>>,
        names: Option<ColumnNames>,
    ) -> Result<Self> {
        let names = names.unwrap_or_else(|| ColumnNames::default_for(m.len(), l_disc.len(), l_cont.len()));
        let ds = Dataset { y, y_kind, m, m_kinds, a, l_disc, l_cont, names };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if self.m.is_empty() {
            return Err(Error::InvalidData("at least one mediator is required".into()));
        }
        if self.m.len() != self.m_kinds.len() {
            return Err(Error::InvalidData("mediator kinds do not match columns".into()));
        }
        if self.names.m.len() != self.m.len()
            || self.names.l_disc.len() != self.l_disc.len()
            || self.names.l_cont.len() != self.l_cont.len()
        {
            return Err(Error::InvalidData("column names do not match columns".into()));
        }
        check_column(&self.names.y, &self.y, n, self.y_kind.is_binary())?;
        check_column(&self.names.a, &self.a, n, true)?;
        for (q, col) in self.m.iter().enumerate() {
            check_column(&self.names.m[q], col, n, self.m_kinds[q].is_binary())?;
        }
        for (k, col) in self.l_disc.iter().enumerate() {
            check_column(&self.names.l_disc[k], col, n, true)?;
        }
        for (k, col) in self.l_cont.iter().enumerate() {
            check_column(&self.names.l_cont[k], col, n, false)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.m.len()
    }

    pub fn layout(&self) -> Layout {
        Layout { y_kind: self.y_kind, m_kinds: self.m_kinds.clone(), p1: self.l_disc.len(), p2: self.l_cont.len() }
    }

    /// `x_i = (a_i, l_disc_i, l_cont_i)`.
    pub fn x_row(&self, i: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(1 + self.l_disc.len() + self.l_cont.len());
        x.push(self.a[i]);
        x.extend(self.l_disc.iter().map(|c| c[i]));
        x.extend(self.l_cont.iter().map(|c| c[i]));
        x
    }

    pub fn m_row(&self, i: usize) -> Vec<f64> {
        self.m.iter().map(|c| c[i]).collect()
    }

    /// Confounders only, `(l_disc, l_cont)`.
    pub fn l_row(&self, i: usize) -> Vec<f64> {
        let mut l = Vec::with_capacity(self.l_disc.len() + self.l_cont.len());
        l.extend(self.l_disc.iter().map(|c| c[i]));
        l.extend(self.l_cont.iter().map(|c| c[i]));
        l
    }

    /// Row subset, in the given order (duplicates allowed, for resampling).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |c: &Vec<f64>| rows.iter().map(|&i| c[i]).collect::<Vec<_>>();
        Dataset {
            y: pick(&self.y),
            y_kind: self.y_kind,
            m: self.m.iter().map(pick).collect(),
            m_kinds: self.m_kinds.clone(),
            a: pick(&self.a),
            l_disc: self.l_disc.iter().map(pick).collect(),
            l_cont: self.l_cont.iter().map(pick).collect(),
            names: self.names.clone(),
        }
    }
}
