//! Industry roster: the ordered node set shared by every quarterly graph.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of distinct industry codes with optional display names and
/// category tags used for snapshot colouring. The position of a code in the
/// list is its node index everywhere downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndustryRoster {
    entries: Vec<RosterEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RosterEntry {
    pub code: String,
    pub name: Option<String>,
    pub category: Option<String>,
}

impl IndustryRoster {
    pub fn new(entries: Vec<RosterEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::config(format!(
                "roster needs at least 2 industries, got {}",
                entries.len()
            )));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.code.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate industry code `{}`", e.code)));
            }
        }
        Ok(IndustryRoster { entries, index })
    }

    pub fn from_codes(codes: Vec<String>) -> Result<Self> {
        Self::new(
            codes
                .into_iter()
                .map(|code| RosterEntry { code, name: None, category: None })
                .collect(),
        )
    }

    /// Synthetic roster of `n` two-digit SIC-style codes with category tags
    /// assigned by code range.
    pub fn synthetic(n: usize) -> Result<Self> {
        let entries = (1..=n)
            .map(|i| {
                let code = format!("{i:02}");
                let category = Some(sic_category(i as u32).to_string());
                RosterEntry { code, name: None, category }
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn code(&self, idx: usize) -> &str {
        &self.entries[idx].code
    }

    pub fn entry(&self, idx: usize) -> &RosterEntry {
        &self.entries[idx]
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    /// Reads a roster CSV with header `code,name,category` (name and
    /// category may be empty).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::data(format!("roster csv: {e}")))?
            .clone();
        let expect = ["code", "name", "category"];
        let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if got != expect {
            return Err(Error::data(format!(
                "roster csv header must be `code,name,category`, got `{}`",
                got.join(",")
            )));
        }
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::data(format!("roster csv: {e}")))?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let opt = |s: String| if s.is_empty() { None } else { Some(s) };
            entries.push(RosterEntry {
                code: field(0),
                name: opt(field(1)),
                category: opt(field(2)),
            });
        }
        Self::new(entries)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("code,name,category\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{}\n",
                e.code,
                e.name.as_deref().unwrap_or(""),
                e.category.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

/// Maps a two-digit SIC-style code onto one of the six snapshot colour
/// categories.
pub fn sic_category(code: u32) -> &'static str {
    match code {
        1..=9 => "Primary Industries",
        10..=39 => "Manufacturing",
        45..=53 => "Trade & Distribution",
        64..=82 => "Financial & Business",
        84..=88 => "Public & Social",
        _ => "Other Services",
    }
}

/// Graphviz fill colour for a category tag; unknown tags render grey.
pub fn category_color(category: &str) -> &'static str {
    match category {
        "Financial & Business" => "#e41a1c",
        "Manufacturing" => "#377eb8",
        "Trade & Distribution" => "#4daf4a",
        "Public & Social" => "#ff7f00",
        "Primary Industries" => "#984ea3",
        _ => "#999999",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_tiny_rosters() {
        assert!(IndustryRoster::from_codes(vec!["A".into()]).is_err());
        assert!(IndustryRoster::from_codes(vec!["A".into(), "A".into()]).is_err());
        let r = IndustryRoster::from_codes(vec!["A".into(), "B".into()]).unwrap();
        assert_eq!(r.index_of("B"), Some(1));
        assert_eq!(r.index_of("C"), None);
    }

    #[test]
    fn synthetic_roster_has_categories() {
        let r = IndustryRoster::synthetic(89).unwrap();
        assert_eq!(r.len(), 89);
        assert_eq!(r.code(63), "64");
        assert_eq!(r.entry(63).category.as_deref(), Some("Financial & Business"));
    }

    #[test]
    fn csv_round_trip() {
        let r = IndustryRoster::synthetic(5).unwrap();
        let csv = r.to_csv_string();
        let back = IndustryRoster::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back.entry(0).category, r.entry(0).category);
    }
}
