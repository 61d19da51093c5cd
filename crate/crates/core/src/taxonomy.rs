//! The hierarchical discipline structure.
//!
//! A taxonomy is a forest of [`DisciplineNode`]s linked by parent codes. It is
//! validated once at construction (unique codes, no dangling parents, no
//! cycles) and immutable afterwards. Every query returns codes in
//! lexicographic order so downstream outputs are deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("duplicate discipline code {0}")]
    DuplicateCode(String),
    #[error("discipline {code} refers to missing parent {parent}")]
    DanglingParent { code: String, parent: String },
    #[error("cycle detected at {0}")]
    Cycle(String),
    #[error("unknown discipline code {0}")]
    UnknownCode(String),
    #[error("taxonomy is empty")]
    Empty,
}

/// One line of the taxonomy file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisciplineNode {
    pub code: String,
    pub name: String,
    pub parent: Option<String>,
}

impl DisciplineNode {
    pub fn new(code: impl Into<String>, name: impl Into<String>, parent: Option<&str>) -> Self {
        DisciplineNode {
            code: code.into(),
            name: name.into(),
            parent: parent.map(str::to_owned),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: BTreeMap<String, DisciplineNode>,
    children: BTreeMap<String, Vec<String>>,
    levels: BTreeMap<String, u32>,
}

impl Taxonomy {
    pub fn from_nodes(nodes: impl IntoIterator<Item = DisciplineNode>) -> Result<Self, TaxonomyError> {
        let mut by_code = BTreeMap::new();
        for node in nodes {
            if by_code.contains_key(&node.code) {
                return Err(TaxonomyError::DuplicateCode(node.code));
            }
            by_code.insert(node.code.clone(), node);
        }
        if by_code.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        // Self-parent and longer cycles are both found by walking up from every node.
        for node in by_code.values() {
            if let Some(parent) = &node.parent {
                if !by_code.contains_key(parent) {
                    return Err(TaxonomyError::DanglingParent {
                        code: node.code.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        let mut levels: BTreeMap<String, u32> = BTreeMap::new();
        for start in by_code.keys() {
            let mut chain: Vec<&str> = Vec::new();
            let mut on_chain = BTreeSet::new();
            let mut cursor = start.as_str();
            let base = loop {
                if let Some(&level) = levels.get(cursor) {
                    break level;
                }
                if !on_chain.insert(cursor) {
                    return Err(TaxonomyError::Cycle(cursor.to_owned()));
                }
                chain.push(cursor);
                match &by_code[cursor].parent {
                    Some(parent) => cursor = parent,
                    None => break 0,
                }
            };
            for (depth, code) in chain.iter().rev().enumerate() {
                levels.insert((*code).to_owned(), base + depth as u32 + 1);
            }
        }

        let mut children: BTreeMap<String, Vec<String>> = by_code.keys().map(|c| (c.clone(), Vec::new())).collect();
        for node in by_code.values() {
            if let Some(parent) = &node.parent {
                children
                    .get_mut(parent)
                    .expect("parent checked")
                    .push(node.code.clone());
            }
        }

        Ok(Taxonomy {
            nodes: by_code,
            children,
            levels,
        })
    }

    /// Parses the line-delimited JSON taxonomy format.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let nodes: Vec<DisciplineNode> = util::read_jsonl(reader, "taxonomy")?;
        Ok(Self::from_nodes(nodes)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = util::open(path)?;
        Self::from_reader(reader).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for node in self.nodes.values() {
            writeln!(w, "{}", serde_json::to_string(node)?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let nodes: Vec<&DisciplineNode> = self.nodes.values().collect();
        util::write_jsonl(path, &nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.nodes.contains_key(code)
    }

    /// Nodes in lexicographic code order.
    pub fn nodes(&self) -> impl Iterator<Item = &DisciplineNode> {
        self.nodes.values()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn node(&self, code: &str) -> Result<&DisciplineNode, TaxonomyError> {
        self.nodes
            .get(code)
            .ok_or_else(|| TaxonomyError::UnknownCode(code.to_owned()))
    }

    pub fn parent(&self, code: &str) -> Result<Option<&str>, TaxonomyError> {
        Ok(self.node(code)?.parent.as_deref())
    }

    /// Level of a node; roots are level 1.
    pub fn level(&self, code: &str) -> Result<u32, TaxonomyError> {
        self.levels
            .get(code)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownCode(code.to_owned()))
    }

    pub fn levels(&self) -> &BTreeMap<String, u32> {
        &self.levels
    }

    pub fn depth(&self) -> u32 {
        self.levels.values().copied().max().unwrap_or(0)
    }

    pub fn children(&self, code: &str) -> Result<&[String], TaxonomyError> {
        self.children
            .get(code)
            .map(Vec::as_slice)
            .ok_or_else(|| TaxonomyError::UnknownCode(code.to_owned()))
    }

    /// Ancestors of `code`, nearest first, excluding `code` itself.
    pub fn ancestors(&self, code: &str) -> Result<Vec<&str>, TaxonomyError> {
        let mut out = Vec::new();
        let mut cursor = self.node(code)?;
        while let Some(parent) = &cursor.parent {
            cursor = &self.nodes[parent];
            out.push(cursor.code.as_str());
        }
        Ok(out)
    }

    /// Names from the root down to `code`, inclusive.
    pub fn name_path(&self, code: &str) -> Result<Vec<String>, TaxonomyError> {
        let mut path: Vec<String> = self
            .ancestors(code)?
            .into_iter()
            .rev()
            .map(|c| self.nodes[c].name.clone())
            .collect();
        path.push(self.nodes[code].name.clone());
        Ok(path)
    }

    pub fn leaves(&self) -> BTreeSet<&str> {
        self.children
            .iter()
            .filter(|(_, kids)| kids.is_empty())
            .map(|(code, _)| code.as_str())
            .collect()
    }

    pub fn is_leaf(&self, code: &str) -> bool {
        self.children.get(code).is_some_and(Vec::is_empty)
    }

    pub fn roots(&self) -> BTreeSet<&str> {
        self.nodes
            .values()
            .filter(|n| n.parent.is_none())
            .map(|n| n.code.as_str())
            .collect()
    }

    /// Union of `labels` and all of their ancestors.
    pub fn closure<'a, I, S>(&self, labels: I) -> Result<BTreeSet<String>, TaxonomyError>
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<str> + ?Sized + 'a,
    {
        let mut out = BTreeSet::new();
        for label in labels {
            let label = label.as_ref();
            if out.contains(label) {
                continue;
            }
            out.insert(label.to_owned());
            for anc in self.ancestors(label)? {
                if !out.insert(anc.to_owned()) {
                    // everything above is already in the set
                    break;
                }
            }
        }
        Ok(out)
    }
}
