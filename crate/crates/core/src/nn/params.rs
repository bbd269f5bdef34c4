use genboot_tensor::{Bindings, Expr, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Name, shape and role of one parameter block of an architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

impl BlockSpec {
    pub fn weight(name: impl Into<String>, shape: &[usize]) -> Self {
        BlockSpec {
            name: name.into(),
            shape: shape.to_vec(),
            kind: ParamKind::Weight,
        }
    }

    pub fn bias(name: impl Into<String>, len: usize) -> Self {
        BlockSpec {
            name: name.into(),
            shape: vec![len],
            kind: ParamKind::Bias,
        }
    }
}

/// Anything that can enumerate its parameter blocks.
pub trait Architecture {
    fn param_specs(&self) -> Vec<BlockSpec>;

    fn param_count(&self) -> usize {
        self.param_specs()
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
}

/// Ordered parameter blocks of one network. Block names double as the leaf
/// names used when the network is built into a graph.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NetworkParams {
    blocks: Vec<ParamBlock>,
}

impl NetworkParams {
    pub fn new(blocks: Vec<ParamBlock>) -> Self {
        NetworkParams { blocks }
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ParamBlock] {
        &mut self.blocks
    }

    pub fn into_blocks(self) -> Vec<ParamBlock> {
        self.blocks
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.blocks.iter().find(|b| b.name == name).map(|b| &b.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.blocks.iter_mut().find(|b| b.name == name).map(|b| &mut b.value)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.value.len()).sum()
    }

    /// One graph leaf per block, in block order.
    pub fn leaves(&self) -> ParamLeaves {
        self.leaves_with_prefix("")
    }

    /// Like [`leaves`](Self::leaves), but each leaf's graph name carries
    /// `prefix` so two networks can share one graph.
    pub fn leaves_with_prefix(&self, prefix: &str) -> ParamLeaves {
        ParamLeaves {
            names: self.blocks.iter().map(|b| b.name.clone()).collect(),
            exprs: self
                .blocks
                .iter()
                .map(|b| Expr::leaf(format!("{prefix}{}", b.name), b.value.shape()))
                .collect(),
        }
    }

    pub fn bind<'a>(&'a self, bindings: &mut Bindings<'a>) {
        self.bind_with_prefix("", bindings);
    }

    pub fn bind_with_prefix<'a>(&'a self, prefix: &str, bindings: &mut Bindings<'a>) {
        for b in &self.blocks {
            bindings.bind(format!("{prefix}{}", b.name), &b.value);
        }
    }

    pub fn bindings(&self) -> Bindings<'_> {
        let mut b = Bindings::new();
        self.bind(&mut b);
        b
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.value.is_finite())
    }
}

/// Graph leaves standing for a [`NetworkParams`].
#[derive(Clone, Debug)]
pub struct ParamLeaves {
    names: Vec<String>,
    exprs: Vec<Expr>,
}

impl ParamLeaves {
    pub fn all(&self) -> &[Expr] {
        &self.exprs
    }

    /// Leaf for the block called `name`.
    ///
    /// Panics if there is no such block; architectures only ask for blocks
    /// they declared.
    pub fn get(&self, name: &str) -> &Expr {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.exprs[i])
            .unwrap_or_else(|| panic!("no parameter block named `{name}`"))
    }
}
