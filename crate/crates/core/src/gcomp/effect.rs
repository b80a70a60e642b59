use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment `a` for the outcome plus, per mediator, the treatment under
/// which it is induced: the potential outcome `Y(a, M(a_1, …, a_Q))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Regime {
    pub a: bool,
    pub induction: Vec<bool>,
}

impl Regime {
    pub fn uniform(a: bool, induced: bool, q: usize) -> Self {
        Regime { a, induction: vec![induced; q] }
    }

    fn code(&self) -> String {
        let bits: String = self.induction.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("Y({},{bits})", self.a as u8)
    }

    fn parse(s: &str) -> Option<Self> {
        let inner = s.trim().strip_prefix("Y(")?.strip_suffix(')')?;
        let (a, bits) = inner.split_once(',')?;
        let a = match a.trim() {
            "0" => false,
            "1" => true,
            _ => return None,
        };
        let induction = bits
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        if induction.is_empty() {
            return None;
        }
        Some(Regime { a, induction })
    }
}

/// A contrast between two potential-outcome means. Mediator indices are
/// zero-based here and one-based in names (`INIE_3`, `PNIE_9_10`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Effect {
    /// `E[Y(1, M(1…1)) − Y(0, M(0…0))]`
    Te,
    /// `E[Y(1, M(0…0)) − Y(0, M(0…0))]`
    Nde,
    /// `E[Y(1, M(1…1)) − Y(1, M(0…0))]`
    Jnie,
    /// Mediator `q` induced under control, the rest under treatment.
    Inie(usize),
    /// Every mediator in the set induced under control.
    Pnie(Vec<usize>),
    /// `E[plus] − E[minus]`.
    Contrast { plus: Regime, minus: Regime },
}

impl Effect {
    /// The standard table: TE, NDE, JNIE and every INIE.
    pub fn standard(q: usize) -> Vec<Effect> {
        let mut v = vec![Effect::Te, Effect::Nde, Effect::Jnie];
        v.extend((0..q).map(Effect::Inie));
        v
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        match self {
            Effect::Inie(k) if *k >= q => Err(Error::InvalidEffect(format!("INIE_{} but only {q} mediators", k + 1))),
            Effect::Pnie(s) => {
                if s.is_empty() {
                    return Err(Error::InvalidEffect("PNIE needs at least one mediator".into()));
                }
                if let Some(k) = s.iter().find(|&&k| k >= q) {
                    return Err(Error::InvalidEffect(format!("PNIE mediator {} is not in 1..{q}", k + 1)));
                }
                if s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidEffect("PNIE mediators must be distinct".into()));
                }
                Ok(())
            }
            Effect::Contrast { plus, minus } => {
                if plus.induction.len() != q || minus.induction.len() != q {
                    return Err(Error::InvalidEffect(format!("contrast regimes must have {q} mediators")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `(plus, minus)` regimes. TE is evaluated through NDE and JNIE, see
    /// [`Effect::regimes`].
    pub fn contrast(&self, q: usize) -> (Regime, Regime) {
        let all1 = Regime::uniform(true, true, q);
        let treated_ctrl = Regime::uniform(true, false, q);
        let ctrl = Regime::uniform(false, false, q);
        let knock_out = |set: &[usize]| {
            let mut r = all1.clone();
            for &k in set {
                r.induction[k] = false;
            }
            r
        };
        match self {
            Effect::Te => (all1, ctrl),
            Effect::Nde => (treated_ctrl, ctrl),
            Effect::Jnie => (all1, treated_ctrl),
            Effect::Inie(k) => (all1.clone(), knock_out(&[*k])),
            Effect::Pnie(s) => (all1.clone(), knock_out(s)),
            Effect::Contrast { plus, minus } => (plus.clone(), minus.clone()),
        }
    }

    /// Every regime the effect needs. TE also needs `Y(1, M(0…0))` so that
    /// it is assembled as NDE + JNIE and the identity holds draw by draw.
    pub fn regimes(&self, q: usize) -> Vec<Regime> {
        let (p, m) = self.contrast(q);
        match self {
            Effect::Te => vec![p, m, Regime::uniform(true, false, q)],
            _ => vec![p, m],
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Te => write!(f, "TE"),
            Effect::Nde => write!(f, "NDE"),
            Effect::Jnie => write!(f, "JNIE"),
            Effect::Inie(k) => write!(f, "INIE_{}", k + 1),
            Effect::Pnie(s) => {
                write!(f, "PNIE")?;
                for k in s {
                    write!(f, "_{}", k + 1)?;
                }
                Ok(())
            }
            Effect::Contrast { plus, minus } => write!(f, "{}-{}", plus.code(), minus.code()),
        }
    }
}

fn one_based(s: &str, whole: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::InvalidEffect(format!("bad mediator index {s:?} in {whole:?}"))),
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "TE" => return Ok(Effect::Te),
            "NDE" => return Ok(Effect::Nde),
            "JNIE" => return Ok(Effect::Jnie),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("INIE_") {
            return Ok(Effect::Inie(one_based(rest, t)?));
        }
        if let Some(rest) = t.strip_prefix("PNIE_") {
            let mut set = rest.split('_').map(|k| one_based(k, t)).collect::<Result<Vec<_>>>()?;
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidEffect(format!("repeated mediator in {t:?}")));
            }
            return Ok(Effect::Pnie(set));
        }
        if let Some((p, m)) = t.split_once(")-") {
            if let (Some(plus), Some(minus)) = (Regime::parse(&format!("{p})")), Regime::parse(m)) {
                if plus.induction.len() == minus.induction.len() {
                    return Ok(Effect::Contrast { plus, minus });
                }
            }
        }
        Err(Error::InvalidEffect(format!("unknown effect {t:?}")))
    }
}

impl TryFrom<String> for Effect {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Effect> for String {
    fn from(e: Effect) -> String {
        e.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in ["TE", "NDE", "JNIE", "INIE_3", "PNIE_9_10", "Y(1,101)-Y(0,001)"] {
            let e: Effect = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert_eq!("PNIE_10_9".parse::<Effect>().unwrap(), Effect::Pnie(vec![8, 9]));
    }

    #[test]
    fn rejects_bad_names() {
        for s in ["ATE", "INIE_0", "INIE_x", "PNIE_2_2", "Y(2,1)-Y(0,1)", "Y(1,10)-Y(0,1)", "PNIE_"] {
            assert!(s.parse::<Effect>().is_err(), "{s}");
        }
        assert!(Effect::Inie(3).validate(3).is_err());
        assert!(Effect::Pnie(vec![0, 4]).validate(4).is_err());
        assert!(Effect::Pnie(vec![0, 3]).validate(4).is_ok());
    }

    #[test]
    fn knock_out_regimes() {
        let (p, m) = Effect::Pnie(vec![0, 2]).contrast(3);
        assert_eq!(p, Regime::uniform(true, true, 3));
        assert_eq!(m, Regime { a: true, induction: vec![false, true, false] });
        let (p, m) = Effect::Nde.contrast(2);
        assert!(p.a && !m.a && !p.induction[0]);
    }
}
