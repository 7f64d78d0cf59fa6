//! Model assembly: unary networks, pairwise tables, and the top
//! transformation, with their parameters in named blocks.

use std::sync::Arc;

use crate::diffnet::{
    Activation, DiffNet, InitScheme, PairTable, ParamLayout, ParamVector, SymmetryMode,
};
use crate::error::{Error, Result};
use crate::regiongraph::{PotentialVector, RegionGraph};
use crate::top::{NetTop, SumTop, TopTransform};

/// How unary potentials are produced from the conditioning input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryKind {
    /// One shared network applied to each variable's feature vector; the
    /// outputs are that variable's per-label scores.
    PerVariable,
    /// One network applied to a global feature vector; output `k` becomes an
    /// antisymmetric pair of scores for binary variable `k`:
    /// `f_k(1) = out_k / 2`, `f_k(0) = -out_k / 2`. The zero-sum split keeps
    /// the two labels symmetric under multiplier rescaling.
    GlobalBinary,
}

/// Pairwise potential sharing across the higher-order (pair) regions.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSpec {
    /// No pairwise parameters; pair slots stay at zero.
    None,
    /// One table shared by every pair region.
    Shared(PairTable),
    /// One table per pair region, in region order.
    PerEdge(Vec<PairTable>),
}

/// Initialization for the top network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopInit {
    IdentityOnes,
    Glorot,
}

/// Architecture of the top transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum TopSpec {
    /// No transformation: scoring sums the masked potentials and inference is
    /// classical MAP.
    None,
    /// `T(y) = w' y` with weights initialized to all ones (plus a bias that
    /// cancels in margins).
    Linear,
    Mlp { hidden: usize, activation: Activation, init: TopInit, input_scale: f64 },
}

/// Conditioning input of one example.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleInput {
    /// One feature vector per variable.
    PerVariable(Vec<Vec<f64>>),
    /// A single global feature vector.
    Global(Vec<f64>),
}

/// Parameters of all model components; each component is one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub unary: ParamVector,
    pub pair: Option<ParamVector>,
    pub top: Option<ParamVector>,
}

impl ModelParams {
    /// Component/block names in canonical order: `unary.*`, `pair.*`, `top.*`.
    pub fn block_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.unary.layout().num_blocks() {
            out.push(format!("unary.{}", self.unary.layout().block_name(i)));
        }
        if let Some(pair) = &self.pair {
            for i in 0..pair.layout().num_blocks() {
                out.push(format!("pair.{}", pair.layout().block_name(i)));
            }
        }
        if let Some(top) = &self.top {
            for i in 0..top.layout().num_blocks() {
                out.push(format!("top.{}", top.layout().block_name(i)));
            }
        }
        out
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            unary: self.unary.zeros_like(),
            pair: self.pair.as_ref().map(|p| p.zeros_like()),
            top: self.top.as_ref().map(|p| p.zeros_like()),
        }
    }

    /// Total parameter count across components.
    pub fn total_len(&self) -> usize {
        self.unary.len()
            + self.pair.as_ref().map_or(0, |p| p.len())
            + self.top.as_ref().map_or(0, |p| p.len())
    }

    pub fn squared_norm(&self) -> f64 {
        let mut total = crate::numeric::dot(&self.unary.values, &self.unary.values);
        if let Some(p) = &self.pair {
            total += crate::numeric::dot(&p.values, &p.values);
        }
        if let Some(p) = &self.top {
            total += crate::numeric::dot(&p.values, &p.values);
        }
        total
    }
}

/// A structured model: graph, unary network, pair tables, top transformation.
#[derive(Debug, Clone)]
pub struct StructuredModel {
    pub graph: RegionGraph,
    pub unary_kind: UnaryKind,
    pub unary_net: DiffNet,
    pub pair: PairSpec,
    pub top: TopSpec,
    top_net: Option<DiffNet>,
}

impl StructuredModel {
    pub fn new(
        graph: RegionGraph,
        unary_kind: UnaryKind,
        unary_net: DiffNet,
        pair: PairSpec,
        top: TopSpec,
    ) -> Result<Self> {
        // Unary output dimensions must match the graph.
        match unary_kind {
            UnaryKind::PerVariable => {
                let d0 = graph.domain(0);
                if graph.domains().iter().any(|&d| d != d0) {
                    return Err(Error::structure(
                        "a shared per-variable unary network needs uniform domains",
                    ));
                }
                if unary_net.output_dim() != d0 {
                    return Err(Error::structure(format!(
                        "unary network outputs {}, variables have domain {}",
                        unary_net.output_dim(),
                        d0
                    )));
                }
            }
            UnaryKind::GlobalBinary => {
                if graph.domains().iter().any(|&d| d != 2) {
                    return Err(Error::structure(
                        "global unary scoring requires binary variables",
                    ));
                }
                if unary_net.output_dim() != graph.num_vars() {
                    return Err(Error::structure(format!(
                        "unary network outputs {}, graph has {} variables",
                        unary_net.output_dim(),
                        graph.num_vars()
                    )));
                }
            }
        }
        // Pair tables must match the pair regions.
        let pair_regions: Vec<(usize, Vec<usize>)> = graph
            .higher_regions()
            .map(|(r, region)| (r, region.vars.clone()))
            .collect();
        match &pair {
            PairSpec::None => {}
            PairSpec::Shared(table) => {
                for (r, vars) in &pair_regions {
                    check_pair_region(&graph, *r, vars, table)?;
                }
            }
            PairSpec::PerEdge(tables) => {
                if tables.len() != pair_regions.len() {
                    return Err(Error::structure(format!(
                        "{} per-edge tables for {} pair regions",
                        tables.len(),
                        pair_regions.len()
                    )));
                }
                for ((r, vars), table) in pair_regions.iter().zip(tables) {
                    check_pair_region(&graph, *r, vars, table)?;
                }
            }
        }
        // Top network consumes the full slot vector.
        let d = graph.total_slots();
        let top_net = match &top {
            TopSpec::None => None,
            TopSpec::Linear => Some(DiffNet::mlp(&[d, 1], Activation::Identity)?),
            TopSpec::Mlp { hidden, activation, .. } => {
                Some(DiffNet::mlp(&[d, *hidden, 1], *activation)?)
            }
        };
        Ok(StructuredModel { graph, unary_kind, unary_net, pair, top, top_net })
    }

    pub fn top_net(&self) -> Option<&DiffNet> {
        self.top_net.as_ref()
    }

    pub fn has_top(&self) -> bool {
        self.top_net.is_some()
    }

    /// Parameter layout of the pairwise component, if any.
    fn pair_layout(&self) -> Result<Option<Arc<ParamLayout>>> {
        let blocks = match &self.pair {
            PairSpec::None => return Ok(None),
            PairSpec::Shared(table) => match table.mode {
                SymmetryMode::None => vec![("w".to_string(), vec![table.rows, table.cols])],
                SymmetryMode::DiagOffdiag => vec![
                    ("diag".to_string(), vec![1]),
                    ("offdiag".to_string(), vec![1]),
                ],
            },
            PairSpec::PerEdge(tables) => {
                let mut blocks = Vec::new();
                for (i, table) in tables.iter().enumerate() {
                    match table.mode {
                        SymmetryMode::None => {
                            blocks.push((format!("e{i}.w"), vec![table.rows, table.cols]))
                        }
                        SymmetryMode::DiagOffdiag => {
                            blocks.push((format!("e{i}.diag"), vec![1]));
                            blocks.push((format!("e{i}.offdiag"), vec![1]));
                        }
                    }
                }
                blocks
            }
        };
        Ok(Some(Arc::new(ParamLayout::new(blocks)?)))
    }

    /// Initialize all components. Unary weights are Glorot-uniform from the
    /// seed, pair tables start at zero, and the top follows its spec.
    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        let unary = self.unary_net.init(InitScheme::GlorotUniform { seed })?;
        let pair = self.pair_layout()?.map(ParamVector::zeros);
        let top = match (&self.top, &self.top_net) {
            (TopSpec::None, _) => None,
            (TopSpec::Linear, Some(net)) => {
                let mut p = net.init(InitScheme::Zeros)?;
                for v in p.block_mut("w0")?.iter_mut() {
                    *v = 1.0;
                }
                Some(p)
            }
            (TopSpec::Mlp { init, .. }, Some(net)) => Some(match init {
                TopInit::IdentityOnes => net.init(InitScheme::IdentityOnes)?,
                TopInit::Glorot => net.init(InitScheme::GlorotUniform {
                    seed: crate::rng::derive(seed, crate::rng::ns::INIT, 1),
                })?,
            }),
            _ => unreachable!("top spec and net always agree"),
        };
        Ok(ModelParams { unary, pair, top })
    }

    /// The transformation `T` backed by the current parameters, or the plain
    /// sum when the model has no top.
    pub fn top_transform<'a>(&'a self, params: &'a ModelParams) -> Result<Box<dyn TopTransform + 'a>> {
        match (&self.top, &self.top_net) {
            (TopSpec::None, _) => Ok(Box::new(SumTop { dim: self.graph.total_slots() })),
            (TopSpec::Linear, Some(net)) => {
                let p = params.top.as_ref().ok_or_else(missing_top)?;
                Ok(Box::new(NetTop::new(net, p, 1.0)?))
            }
            (TopSpec::Mlp { input_scale, .. }, Some(net)) => {
                let p = params.top.as_ref().ok_or_else(missing_top)?;
                Ok(Box::new(NetTop::new(net, p, *input_scale)?))
            }
            _ => unreachable!("top spec and net always agree"),
        }
    }

    pub fn top_input_scale(&self) -> f64 {
        match &self.top {
            TopSpec::Mlp { input_scale, .. } => *input_scale,
            _ => 1.0,
        }
    }

    fn check_input(&self, input: &ExampleInput) -> Result<()> {
        match (self.unary_kind, input) {
            (UnaryKind::PerVariable, ExampleInput::PerVariable(feats)) => {
                if feats.len() != self.graph.num_vars() {
                    return Err(Error::structure(format!(
                        "{} feature vectors for {} variables",
                        feats.len(),
                        self.graph.num_vars()
                    )));
                }
                for (k, f) in feats.iter().enumerate() {
                    if f.len() != self.unary_net.input_dim() {
                        return Err(Error::structure(format!(
                            "variable {k} features have length {}, network expects {}",
                            f.len(),
                            self.unary_net.input_dim()
                        )));
                    }
                }
                Ok(())
            }
            (UnaryKind::GlobalBinary, ExampleInput::Global(f)) => {
                if f.len() != self.unary_net.input_dim() {
                    return Err(Error::structure(format!(
                        "global features have length {}, network expects {}",
                        f.len(),
                        self.unary_net.input_dim()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::structure("example input kind does not match the model")),
        }
    }

    /// Assemble the full potential vector for one example.
    pub fn potentials(&self, params: &ModelParams, input: &ExampleInput) -> Result<PotentialVector> {
        self.check_input(input)?;
        let graph = &self.graph;
        let mut f = PotentialVector::zeros(graph.total_slots());
        match (self.unary_kind, input) {
            (UnaryKind::PerVariable, ExampleInput::PerVariable(feats)) => {
                for (k, feat) in feats.iter().enumerate() {
                    let out = self.unary_net.forward(&params.unary, feat)?;
                    let offset = graph.region_offset(k);
                    f.values[offset..offset + out.len()].copy_from_slice(&out);
                }
            }
            (UnaryKind::GlobalBinary, ExampleInput::Global(feat)) => {
                let out = self.unary_net.forward(&params.unary, feat)?;
                for (k, &score) in out.iter().enumerate() {
                    f.values[graph.region_offset(k)] = -0.5 * score;
                    f.values[graph.region_offset(k) + 1] = 0.5 * score;
                }
            }
            _ => unreachable!("checked above"),
        }
        self.fill_pair_slots(params, &mut f)?;
        Ok(f)
    }

    fn fill_pair_slots(&self, params: &ModelParams, f: &mut PotentialVector) -> Result<()> {
        let graph = &self.graph;
        match &self.pair {
            PairSpec::None => Ok(()),
            PairSpec::Shared(table) => {
                let p = params.pair.as_ref().ok_or_else(missing_pair)?;
                let w = shared_table_params(table, p)?;
                for (r, _) in graph.higher_regions() {
                    write_pair_region(graph, r, table, w, f)?;
                }
                Ok(())
            }
            PairSpec::PerEdge(tables) => {
                let p = params.pair.as_ref().ok_or_else(missing_pair)?;
                for (edge, (r, _)) in graph.higher_regions().enumerate() {
                    let table = &tables[edge];
                    let w = per_edge_table_params(edge, table, p)?;
                    write_pair_region(graph, r, table, &w, f)?;
                }
                Ok(())
            }
        }
    }

    /// Pair table and its parameter slice for a higher-order region ordinal,
    /// for gradient accumulation.
    pub fn pair_block_for_edge(&self, edge: usize) -> Option<(&PairTable, PairBlockId)> {
        match &self.pair {
            PairSpec::None => None,
            PairSpec::Shared(table) => Some((table, PairBlockId::Shared(table.mode))),
            PairSpec::PerEdge(tables) => {
                Some((&tables[edge], PairBlockId::Edge(edge, tables[edge].mode)))
            }
        }
    }
}

/// Identifies the parameter block(s) of one pair table within the pair
/// component vector.
#[derive(Debug, Clone, Copy)]
pub enum PairBlockId {
    Shared(SymmetryMode),
    Edge(usize, SymmetryMode),
}

impl PairBlockId {
    /// Gather the table's free parameters as a contiguous vector.
    pub fn gather(&self, pair: &ParamVector) -> Result<Vec<f64>> {
        match self {
            PairBlockId::Shared(SymmetryMode::None) => Ok(pair.block("w")?.to_vec()),
            PairBlockId::Shared(SymmetryMode::DiagOffdiag) => {
                Ok(vec![pair.block("diag")?[0], pair.block("offdiag")?[0]])
            }
            PairBlockId::Edge(e, SymmetryMode::None) => Ok(pair.block(&format!("e{e}.w"))?.to_vec()),
            PairBlockId::Edge(e, SymmetryMode::DiagOffdiag) => Ok(vec![
                pair.block(&format!("e{e}.diag"))?[0],
                pair.block(&format!("e{e}.offdiag"))?[0],
            ]),
        }
    }

    /// Scatter a gathered gradient back into the component vector.
    pub fn scatter_add(&self, grad: &[f64], pair: &mut ParamVector) -> Result<()> {
        match self {
            PairBlockId::Shared(SymmetryMode::None) => {
                crate::numeric::axpy(1.0, grad, pair.block_mut("w")?)
            }
            PairBlockId::Shared(SymmetryMode::DiagOffdiag) => {
                pair.block_mut("diag")?[0] += grad[0];
                pair.block_mut("offdiag")?[0] += grad[1];
            }
            PairBlockId::Edge(e, SymmetryMode::None) => {
                crate::numeric::axpy(1.0, grad, pair.block_mut(&format!("e{e}.w"))?)
            }
            PairBlockId::Edge(e, SymmetryMode::DiagOffdiag) => {
                pair.block_mut(&format!("e{e}.diag"))?[0] += grad[0];
                pair.block_mut(&format!("e{e}.offdiag"))?[0] += grad[1];
            }
        }
        Ok(())
    }
}

fn missing_pair() -> Error {
    Error::structure("model has pair tables but parameters carry no pair component")
}

fn missing_top() -> Error {
    Error::structure("model has a top network but parameters carry no top component")
}

fn check_pair_region(
    graph: &RegionGraph,
    r: usize,
    vars: &[usize],
    table: &PairTable,
) -> Result<()> {
    if vars.len() != 2 {
        return Err(Error::structure(format!(
            "pair tables require arity-2 regions, region {r} has arity {}",
            vars.len()
        )));
    }
    if table.rows != graph.domain(vars[0]) || table.cols != graph.domain(vars[1]) {
        return Err(Error::structure(format!(
            "pair table is {}x{}, region {r} needs {}x{}",
            table.rows,
            table.cols,
            graph.domain(vars[0]),
            graph.domain(vars[1])
        )));
    }
    Ok(())
}

fn shared_table_params<'a>(table: &PairTable, p: &'a ParamVector) -> Result<&'a [f64]> {
    match table.mode {
        SymmetryMode::None => p.block("w"),
        SymmetryMode::DiagOffdiag => {
            // diag and offdiag are adjacent single-value blocks
            let i = p
                .layout()
                .find("diag")
                .ok_or_else(|| Error::structure("missing diag block"))?;
            let range = p.layout().block_range(i);
            Ok(&p.values[range.start..range.start + 2])
        }
    }
}

fn per_edge_table_params(edge: usize, table: &PairTable, p: &ParamVector) -> Result<Vec<f64>> {
    match table.mode {
        SymmetryMode::None => Ok(p.block(&format!("e{edge}.w"))?.to_vec()),
        SymmetryMode::DiagOffdiag => Ok(vec![
            p.block(&format!("e{edge}.diag"))?[0],
            p.block(&format!("e{edge}.offdiag"))?[0],
        ]),
    }
}

fn write_pair_region(
    graph: &RegionGraph,
    r: usize,
    table: &PairTable,
    w: &[f64],
    f: &mut PotentialVector,
) -> Result<()> {
    let offset = graph.region_offset(r);
    let vars = &graph.region(r).vars;
    let cols = graph.domain(vars[1]);
    for s in 0..graph.domain(vars[0]) {
        for t in 0..cols {
            f.values[offset + s * cols + t] = table.eval(w, s, t)?;
        }
    }
    Ok(())
}
