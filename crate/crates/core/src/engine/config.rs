use std::collections::HashMap;
use std::sync::Arc;

use super::types::{Charge, MembraneNode};
use crate::error::EngineError;
use crate::multiset::Multiset;
use crate::symbol::Label;

/// The fixed shape of a membrane tree. Membrane 0 is the skin; membranes are
/// numbered in pre-order.
#[derive(Debug, PartialEq, Eq)]
pub struct Structure {
    labels: Vec<Label>,
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    index: HashMap<Label, usize>,
}

impl Structure {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, m: usize) -> Label {
        self.labels[m]
    }

    pub fn parent(&self, m: usize) -> Option<usize> {
        self.parents[m]
    }

    pub fn children(&self, m: usize) -> &[usize] {
        &self.children[m]
    }

    pub fn find(&self, label: Label) -> Option<usize> {
        self.index.get(&label).copied()
    }

    pub fn require(&self, label: Label) -> Result<usize, EngineError> {
        self.find(label)
            .ok_or_else(|| EngineError::UnknownLabel(label.to_string()))
    }

    /// Region index of the region surrounding membrane `m`: the parent, or
    /// the environment for the skin.
    pub fn outside(&self, m: usize) -> usize {
        self.parents[m].unwrap_or(self.environment())
    }

    /// Region index of the environment (one past the last membrane).
    pub fn environment(&self) -> usize {
        self.labels.len()
    }
}

/// An instantaneous state: charges and region contents of every membrane,
/// plus whatever has been expelled from the skin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub(crate) structure: Arc<Structure>,
    pub(crate) charges: Vec<Charge>,
    /// One entry per membrane followed by the environment.
    pub(crate) regions: Vec<Multiset>,
}

impl Configuration {
    /// Flattens a membrane tree. Fails on duplicate labels.
    pub fn from_tree(tree: &MembraneNode) -> Result<Configuration, EngineError> {
        let mut labels = Vec::new();
        let mut parents = Vec::new();
        let mut charges = Vec::new();
        let mut regions = Vec::new();
        let mut index = HashMap::new();
        let mut stack: Vec<(&MembraneNode, Option<usize>)> = vec![(tree, None)];
        while let Some((node, parent)) = stack.pop() {
            let id = labels.len();
            if index.insert(node.label, id).is_some() {
                return Err(EngineError::Invalid(format!(
                    "duplicate membrane label '{}'",
                    node.label
                )));
            }
            labels.push(node.label);
            parents.push(parent);
            charges.push(node.charge);
            regions.push(node.contents.clone());
            for child in node.children.iter().rev() {
                stack.push((child, Some(id)));
            }
        }
        let mut children = vec![Vec::new(); labels.len()];
        for (m, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(m);
            }
        }
        regions.push(Multiset::new());
        Ok(Configuration {
            structure: Arc::new(Structure {
                labels,
                parents,
                children,
                index,
            }),
            charges,
            regions,
        })
    }

    pub fn structure(&self) -> &Arc<Structure> {
        &self.structure
    }

    pub fn membrane_count(&self) -> usize {
        self.structure.len()
    }

    pub fn charge(&self, label: Label) -> Result<Charge, EngineError> {
        Ok(self.charges[self.structure.require(label)?])
    }

    pub fn contents(&self, label: Label) -> Result<&Multiset, EngineError> {
        Ok(&self.regions[self.structure.require(label)?])
    }

    pub fn skin(&self) -> &Multiset {
        &self.regions[0]
    }

    pub fn environment(&self) -> &Multiset {
        &self.regions[self.structure.environment()]
    }

    pub fn region(&self, idx: usize) -> &Multiset {
        &self.regions[idx]
    }

    pub fn charge_at(&self, m: usize) -> Charge {
        self.charges[m]
    }

    /// Rebuilds the nested tree view of this configuration.
    pub fn to_tree(&self) -> MembraneNode {
        fn build(cfg: &Configuration, m: usize) -> MembraneNode {
            MembraneNode {
                label: cfg.structure.label(m),
                charge: cfg.charges[m],
                contents: cfg.regions[m].clone(),
                children: cfg
                    .structure
                    .children(m)
                    .iter()
                    .map(|&c| build(cfg, c))
                    .collect(),
            }
        }
        build(self, 0)
    }
}

/// Filtered copy of one region. `base` of `None` keeps everything.
pub fn read_region(
    cfg: &Configuration,
    label: Label,
    base: Option<&str>,
) -> Result<Multiset, EngineError> {
    let region = cfg.contents(label)?;
    Ok(match base {
        Some(b) => region.filter_base(|name| name == b),
        None => region.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Symbol;

    #[test]
    fn flattens_in_preorder() {
        let tree = MembraneNode::new("0")
            .with_child(MembraneNode::new("1").with_child(MembraneNode::new("3")))
            .with_child(MembraneNode::new("2"));
        let cfg = Configuration::from_tree(&tree).unwrap();
        let s = cfg.structure();
        let order: Vec<_> = (0..s.len()).map(|m| s.label(m).to_string()).collect();
        assert_eq!(order, ["0", "1", "3", "2"]);
        assert_eq!(s.parent(2), Some(1));
        assert_eq!(s.outside(0), s.environment());
        assert_eq!(cfg.to_tree(), tree);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let tree = MembraneNode::new("0")
            .with_child(MembraneNode::new("x"))
            .with_child(MembraneNode::new("x"));
        assert!(Configuration::from_tree(&tree).is_err());
    }

    #[test]
    fn read_region_filters() {
        let d = Symbol::plain("d");
        let tree = MembraneNode::new("0")
            .with_contents(Multiset::from_pairs([(d, 4), (Symbol::plain("f"), 1)]))
            .with_child(MembraneNode::new("1"));
        let cfg = Configuration::from_tree(&tree).unwrap();
        let got = read_region(&cfg, Label::new("0"), Some("d")).unwrap();
        assert_eq!(got.count(d), 4);
        assert_eq!(got.distinct(), 1);
        assert!(read_region(&cfg, Label::new("1"), Some("d")).unwrap().is_empty());
        assert!(matches!(
            read_region(&cfg, Label::new("nope"), None),
            Err(EngineError::UnknownLabel(_))
        ));
    }
}
