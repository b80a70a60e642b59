//! CSV data exchange and the column schema.

use std::collections::BTreeMap;
use std::path::Path;

use edpmed_core::{ColumnNames, Dataset, VarKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Outcome,
    Treatment,
    Mediator,
    Confounder,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<VarKind>,
}

/// Column name → role and type. Mediators and confounders keep the order
/// of the CSV header.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub columns: BTreeMap<String, ColumnSpec>,
}

/// A standalone schema file holds a single `[schema]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub schema: Schema,
}

impl Schema {
    pub fn for_dataset(ds: &Dataset) -> Schema {
        let mut columns = BTreeMap::new();
        let mut put = |name: &str, role, kind| {
            columns.insert(name.to_string(), ColumnSpec { role, kind });
        };
        put(&ds.names.y, Role::Outcome, Some(ds.y_kind));
        put(&ds.names.a, Role::Treatment, Some(VarKind::Binary));
        for (name, kind) in ds.names.m.iter().zip(&ds.m_kinds) {
            put(name, Role::Mediator, Some(*kind));
        }
        for name in &ds.names.l_disc {
            put(name, Role::Confounder, Some(VarKind::Binary));
        }
        for name in &ds.names.l_cont {
            put(name, Role::Confounder, Some(VarKind::Continuous));
        }
        Schema { columns }
    }

    pub fn load(path: &Path) -> CliResult<Schema> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read schema {}: {e}", path.display())))?;
        let f: SchemaFile =
            toml::from_str(&text).map_err(|e| CliError::config(format!("schema {}: {e}", path.display())))?;
        Ok(f.schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&SchemaFile { schema: self.clone() }).expect("schema serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Parse CSV text against a schema.
pub fn ingest_csv(text: &[u8], schema: &Schema) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::input("missing header row"));
    }
    for (k, name) in header.iter().enumerate() {
        if header[..k].contains(name) {
            return Err(CliError::input(format!("duplicate column `{name}`")));
        }
        if !schema.columns.contains_key(name) {
            return Err(CliError::config(format!(
                "column `{name}` has no role in the schema; add it with role = \"ignore\" to skip it"
            )));
        }
    }
    for name in schema.columns.keys() {
        if !header.contains(name) {
            return Err(CliError::input(format!("missing column `{name}`")));
        }
    }

    let mut roles: Vec<(usize, &String, &ColumnSpec)> = vec![];
    for (k, name) in header.iter().enumerate() {
        roles.push((k, name, &schema.columns[name]));
    }
    let with_role = |r: Role| roles.iter().filter(move |c| c.2.role == r);
    let need_kind = |name: &str, spec: &ColumnSpec| {
        spec.kind.ok_or_else(|| CliError::config(format!("column `{name}` needs a kind (binary or continuous)")))
    };
    let outcome: Vec<_> = with_role(Role::Outcome).collect();
    let treatment: Vec<_> = with_role(Role::Treatment).collect();
    if outcome.len() != 1 || treatment.len() != 1 {
        return Err(CliError::config("the schema needs exactly one outcome and one treatment column"));
    }
    if treatment[0].2.kind == Some(VarKind::Continuous) {
        return Err(CliError::config(format!("treatment `{}` must be binary", treatment[0].1)));
    }
    let y_kind = need_kind(outcome[0].1, outcome[0].2)?;

    let mut cols: Vec<Vec<f64>> = vec![vec![]; header.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("row {}: {e}", r + 1)))?;
        for (k, cell) in rec.iter().enumerate() {
            if schema.columns[&header[k]].role == Role::Ignore {
                continue;
            }
            if cell.is_empty() {
                return Err(CliError::input(format!("row {}, column `{}`: missing cell", r + 1, header[k])));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(format!("row {}, column `{}`: `{cell}` is not a number", r + 1, header[k]))
            })?;
            cols[k].push(v);
        }
    }

    let mut names =
        ColumnNames { y: outcome[0].1.clone(), a: treatment[0].1.clone(), m: vec![], l_disc: vec![], l_cont: vec![] };
    let (mut m, mut m_kinds, mut l_disc, mut l_cont) = (vec![], vec![], vec![], vec![]);
    for (k, name, spec) in with_role(Role::Mediator) {
        m_kinds.push(need_kind(name, spec)?);
        m.push(std::mem::take(&mut cols[*k]));
        names.m.push((*name).clone());
    }
    for (k, name, spec) in with_role(Role::Confounder) {
        match need_kind(name, spec)? {
            VarKind::Binary => {
                l_disc.push(std::mem::take(&mut cols[*k]));
                names.l_disc.push((*name).clone());
            }
            VarKind::Continuous => {
                l_cont.push(std::mem::take(&mut cols[*k]));
                names.l_cont.push((*name).clone());
            }
        }
    }
    let y = std::mem::take(&mut cols[outcome[0].0]);
    let a = std::mem::take(&mut cols[treatment[0].0]);
    Dataset::new(y, y_kind, m, m_kinds, a, l_disc, l_cont, Some(names)).map_err(|e| CliError::input(e.to_string()))
}

pub fn load_csv(path: &Path, schema: &Schema) -> CliResult<Dataset> {
    ingest_csv(&read_bytes(path)?, schema).map_err(|e| CliError { message: format!("{}: {}", path.display(), e), ..e })
}

/// Columns in the order outcome, treatment, mediators, binary then
/// continuous confounders. Values use the shortest exact decimal form.
pub fn dataset_to_csv(ds: &Dataset) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    let mut header = vec![ds.names.y.as_str(), ds.names.a.as_str()];
    header.extend(ds.names.m.iter().map(String::as_str));
    header.extend(ds.names.l_disc.iter().map(String::as_str));
    header.extend(ds.names.l_cont.iter().map(String::as_str));
    w.write_record(&header).expect("in-memory write");
    for i in 0..ds.n() {
        let mut row = vec![ds.y[i], ds.a[i]];
        row.extend(ds.m.iter().map(|c| c[i]));
        row.extend(ds.l_disc.iter().map(|c| c[i]));
        row.extend(ds.l_cont.iter().map(|c| c[i]));
        w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
