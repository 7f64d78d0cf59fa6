//! Discrete output-space structure: variables, domains, regions, and the flat
//! slot layout shared by potentials, `y`, `lambda`, and masked score vectors.
//!
//! A region graph has `K` variables with finite domains. The first `K` regions
//! are always the unary regions `{0}..{K-1}`; higher-order regions follow in
//! declared order as ascending variable tuples. Every `(region, assignment)`
//! pair owns one slot in a flat vector of length `D = sum_r prod_{k in r} |X_k|`.
//! Within a region the assignment index is mixed-radix with the first
//! (lowest-numbered) variable most significant, matching row-major tables.

use crate::error::{Error, Result};

/// A subset of variables carrying a local score table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Member variables in ascending order.
    pub vars: Vec<usize>,
}

/// Variables, domains, regions, and the flat slot layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    domains: Vec<usize>,
    regions: Vec<Region>,
    /// Start slot of each region, plus a trailing sentinel equal to `D`.
    offsets: Vec<usize>,
}

/// A full configuration: one label per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>) -> Self {
        Assignment { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Length-D real vector over `(region, assignment)` slots.
///
/// Plays the roles of the raw potentials, the masked score vector, `y`,
/// `lambda`, and dual subgradients; which one is a matter of context.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    pub values: Vec<f64>,
}

impl PotentialVector {
    pub fn zeros(len: usize) -> Self {
        PotentialVector { values: vec![0.0; len] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        PotentialVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Constant vector, useful for the all-ones `lambda` initialization.
    pub fn constant(len: usize, value: f64) -> Self {
        PotentialVector { values: vec![value; len] }
    }

    pub fn dot(&self, other: &PotentialVector) -> f64 {
        crate::numeric::dot(&self.values, &other.values)
    }
}

impl RegionGraph {
    /// Build a graph from per-variable domain sizes and higher-order regions.
    ///
    /// Unary regions are implicit and always come first. Higher-order regions
    /// keep their declared order.
    pub fn new(domains: Vec<usize>, higher: Vec<Vec<usize>>) -> Result<Self> {
        let k = domains.len();
        if k == 0 {
            return Err(Error::structure("graph needs at least one variable"));
        }
        for (i, &d) in domains.iter().enumerate() {
            if d == 0 {
                return Err(Error::structure(format!("variable {i} has empty domain")));
            }
        }
        let mut regions: Vec<Region> = (0..k).map(|v| Region { vars: vec![v] }).collect();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for vars in higher {
            if vars.len() < 2 {
                return Err(Error::structure(
                    "higher-order regions need at least two variables",
                ));
            }
            if !vars.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::structure(format!(
                    "region {vars:?} must list distinct variables in ascending order"
                )));
            }
            if *vars.last().unwrap() >= k {
                return Err(Error::structure(format!(
                    "region {vars:?} references variable out of range (K={k})"
                )));
            }
            if seen.contains(&vars) {
                return Err(Error::structure(format!("duplicate region {vars:?}")));
            }
            seen.push(vars.clone());
            regions.push(Region { vars });
        }

        let mut offsets = Vec::with_capacity(regions.len() + 1);
        let mut total = 0usize;
        for r in &regions {
            offsets.push(total);
            total += r.vars.iter().map(|&v| domains[v]).product::<usize>();
        }
        offsets.push(total);

        Ok(RegionGraph { domains, regions, offsets })
    }

    /// Chain: unaries plus pair regions `(k, k+1)`.
    pub fn build_chain(k: usize, d: usize) -> Result<Self> {
        let higher = (0..k.saturating_sub(1)).map(|i| vec![i, i + 1]).collect();
        RegionGraph::new(vec![d; k], higher)
    }

    /// Chain plus skip pairs `(k, k+2)`.
    pub fn build_second_order(k: usize, d: usize) -> Result<Self> {
        let mut higher: Vec<Vec<usize>> =
            (0..k.saturating_sub(1)).map(|i| vec![i, i + 1]).collect();
        higher.extend((0..k.saturating_sub(2)).map(|i| vec![i, i + 2]));
        RegionGraph::new(vec![d; k], higher)
    }

    /// All pairs `i < j` in lexicographic order.
    pub fn build_fully_connected(k: usize, d: usize) -> Result<Self> {
        let mut higher = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                higher.push(vec![i, j]);
            }
        }
        RegionGraph::new(vec![d; k], higher)
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domain(&self, var: usize) -> usize {
        self.domains[var]
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    /// Regions with two or more variables, indexed from `num_vars()`.
    pub fn higher_regions(&self) -> impl Iterator<Item = (usize, &Region)> {
        self.regions.iter().enumerate().skip(self.num_vars())
    }

    pub fn num_higher_regions(&self) -> usize {
        self.regions.len() - self.num_vars()
    }

    /// True when the higher-order regions are exactly the consecutive pairs
    /// `(k, k+1)` in order, the shape exact dynamic programming handles.
    pub fn is_chain(&self) -> bool {
        let k = self.num_vars();
        self.num_higher_regions() == k.saturating_sub(1)
            && self
                .higher_regions()
                .enumerate()
                .all(|(i, (_, region))| region.vars == [i, i + 1])
    }

    pub fn region(&self, r: usize) -> &Region {
        &self.regions[r]
    }

    /// Total slot count `D`.
    pub fn total_slots(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn region_offset(&self, r: usize) -> usize {
        self.offsets[r]
    }

    /// Number of joint assignments of region `r`.
    pub fn region_size(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    /// Flat slot for a local assignment of region `r`.
    ///
    /// The local assignment lists one label per member variable, in the
    /// region's (ascending) variable order; the first variable is most
    /// significant in the mixed-radix index.
    pub fn flat_index(&self, r: usize, local: &[usize]) -> Result<usize> {
        let region = &self.regions[r];
        if local.len() != region.vars.len() {
            return Err(Error::structure(format!(
                "region {r} has arity {}, got assignment of length {}",
                region.vars.len(),
                local.len()
            )));
        }
        let mut idx = 0usize;
        for (&v, &s) in region.vars.iter().zip(local) {
            let d = self.domains[v];
            if s >= d {
                return Err(Error::structure(format!(
                    "label {s} out of range for variable {v} (|X|={d})"
                )));
            }
            idx = idx * d + s;
        }
        Ok(self.offsets[r] + idx)
    }

    /// Inverse of [`flat_index`]: `(region, local assignment)` for a slot.
    pub fn slot_to_assignment(&self, slot: usize) -> Result<(usize, Vec<usize>)> {
        if slot >= self.total_slots() {
            return Err(Error::structure(format!(
                "slot {slot} out of range (D={})",
                self.total_slots()
            )));
        }
        let r = match self.offsets.binary_search(&slot) {
            Ok(i) if i < self.regions.len() => i,
            Ok(i) => i - 1,
            Err(i) => i - 1,
        };
        let mut idx = slot - self.offsets[r];
        let vars = &self.regions[r].vars;
        let mut local = vec![0usize; vars.len()];
        for pos in (0..vars.len()).rev() {
            let d = self.domains[vars[pos]];
            local[pos] = idx % d;
            idx /= d;
        }
        Ok((r, local))
    }

    /// Slot selected by a full configuration within region `r`.
    pub fn selected_slot(&self, r: usize, x: &Assignment) -> usize {
        let region = &self.regions[r];
        let mut idx = 0usize;
        for &v in &region.vars {
            idx = idx * self.domains[v] + x.labels[v];
        }
        self.offsets[r] + idx
    }

    fn check_assignment(&self, x: &Assignment) -> Result<()> {
        if x.labels.len() != self.num_vars() {
            return Err(Error::structure(format!(
                "assignment has {} labels, graph has {} variables",
                x.labels.len(),
                self.num_vars()
            )));
        }
        for (v, &s) in x.labels.iter().enumerate() {
            if s >= self.domains[v] {
                return Err(Error::structure(format!(
                    "label {s} out of range for variable {v}"
                )));
            }
        }
        Ok(())
    }

    fn check_len(&self, f: &PotentialVector) -> Result<()> {
        if f.len() != self.total_slots() {
            return Err(Error::structure(format!(
                "potential vector has length {}, layout expects {}",
                f.len(),
                self.total_slots()
            )));
        }
        Ok(())
    }

    /// Keep `f` at the slots selected by `x`, zero everywhere else.
    ///
    /// Exactly one slot per region survives; summing the result recovers the
    /// decomposed score of `x`.
    pub fn mask(&self, f: &PotentialVector, x: &Assignment) -> Result<PotentialVector> {
        self.check_len(f)?;
        self.check_assignment(x)?;
        let mut out = PotentialVector::zeros(f.len());
        for r in 0..self.num_regions() {
            let slot = self.selected_slot(r, x);
            out.values[slot] = f.values[slot];
        }
        Ok(out)
    }

    /// Sum of `f` over the slots selected by `x`: the decomposed score
    /// `sum_r f_r(x_r)`.
    pub fn score_decomposed(&self, f: &PotentialVector, x: &Assignment) -> Result<f64> {
        self.check_len(f)?;
        self.check_assignment(x)?;
        let mut total = 0.0;
        for r in 0..self.num_regions() {
            total += f.values[self.selected_slot(r, x)];
        }
        Ok(total)
    }

    /// Slice of `f` covering region `r`, without copying.
    pub fn region_slice<'a>(&self, f: &'a PotentialVector, r: usize) -> &'a [f64] {
        &f.values[self.offsets[r]..self.offsets[r + 1]]
    }

    /// Enumerate all full configurations in lexicographic order.
    ///
    /// Intended for small instances (oracles, tests); errors above `limit`
    /// configurations.
    pub fn enumerate_assignments(&self, limit: usize) -> Result<Vec<Assignment>> {
        let mut count = 1usize;
        for &d in &self.domains {
            count = count.checked_mul(d).ok_or_else(|| {
                Error::structure("assignment space overflows usize")
            })?;
            if count > limit {
                return Err(Error::structure(format!(
                    "assignment space exceeds limit {limit}"
                )));
            }
        }
        let k = self.num_vars();
        let mut out = Vec::with_capacity(count);
        let mut labels = vec![0usize; k];
        loop {
            out.push(Assignment::new(labels.clone()));
            let mut pos = k;
            while pos > 0 {
                pos -= 1;
                labels[pos] += 1;
                if labels[pos] < self.domains[pos] {
                    break;
                }
                labels[pos] = 0;
                if pos == 0 {
                    return Ok(out);
                }
            }
        }
    }

    /// Canonical single-line description: variable count, per-variable
    /// domains, higher-order regions. Round-trips through [`parse_description`].
    pub fn description(&self) -> String {
        let domains = self
            .domains
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let regions = self
            .regions
            .iter()
            .skip(self.num_vars())
            .map(|r| {
                let vars = r
                    .vars
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("({vars})")
            })
            .collect::<String>();
        format!("vars={};domains={};regions={}", self.num_vars(), domains, regions)
    }

    /// Parse the textual description produced by [`description`].
    pub fn parse_description(text: &str) -> Result<Self> {
        let mut vars: Option<usize> = None;
        let mut domains: Option<Vec<usize>> = None;
        let mut regions: Vec<Vec<usize>> = Vec::new();
        for part in text.trim().split(';') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("expected key=value, got {part:?}")))?;
            match key {
                "vars" => {
                    vars = Some(value.parse().map_err(|_| {
                        Error::parse(format!("bad variable count {value:?}"))
                    })?)
                }
                "domains" => {
                    let ds = value
                        .split(',')
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|_| Error::parse(format!("bad domain size {s:?}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    domains = Some(ds);
                }
                "regions" => {
                    let mut rest = value;
                    while !rest.is_empty() {
                        if !rest.starts_with('(') {
                            return Err(Error::parse(format!("bad region list {value:?}")));
                        }
                        let end = rest
                            .find(')')
                            .ok_or_else(|| Error::parse("unterminated region tuple"))?;
                        let tuple = &rest[1..end];
                        let vs = tuple
                            .split(',')
                            .map(|s| {
                                s.trim().parse::<usize>().map_err(|_| {
                                    Error::parse(format!("bad region member {s:?}"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        regions.push(vs);
                        rest = &rest[end + 1..];
                    }
                }
                other => return Err(Error::parse(format!("unknown graph field {other:?}"))),
            }
        }
        let vars = vars.ok_or_else(|| Error::parse("graph description missing vars"))?;
        let domains = domains.ok_or_else(|| Error::parse("graph description missing domains"))?;
        if domains.len() != vars {
            return Err(Error::parse(format!(
                "graph description lists {} domains for {} vars",
                domains.len(),
                vars
            )));
        }
        RegionGraph::new(domains, regions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_layout_matches_expected_counts() {
        let g = RegionGraph::build_chain(5, 26).unwrap();
        assert_eq!(g.num_regions(), 5 + 4);
        assert_eq!(g.total_slots(), 5 * 26 + 4 * 676);
        assert_eq!(g.total_slots(), 2834);
    }

    #[test]
    fn second_order_layout() {
        let g = RegionGraph::build_second_order(5, 26).unwrap();
        assert_eq!(g.num_regions(), 5 + 4 + 3);
        assert_eq!(g.total_slots(), 130 + 7 * 676);
        assert_eq!(g.total_slots(), 4862);
    }

    #[test]
    fn single_variable_chain() {
        let g = RegionGraph::build_chain(1, 3).unwrap();
        assert_eq!(g.num_regions(), 1);
        assert_eq!(g.total_slots(), 3);
    }

    #[test]
    fn chain_detection() {
        assert!(RegionGraph::build_chain(4, 3).unwrap().is_chain());
        assert!(RegionGraph::build_chain(1, 3).unwrap().is_chain());
        assert!(!RegionGraph::build_second_order(4, 3).unwrap().is_chain());
        // a star has K-1 pair regions but is not a chain
        let star = RegionGraph::new(vec![2; 4], vec![vec![0, 1], vec![0, 2], vec![0, 3]]).unwrap();
        assert!(!star.is_chain());
    }

    #[test]
    fn fully_connected_pairs() {
        let g = RegionGraph::build_fully_connected(4, 2).unwrap();
        let pairs: Vec<_> = g.higher_regions().map(|(_, r)| r.vars.clone()).collect();
        assert_eq!(
            pairs,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn flat_index_pair_layout() {
        // 2 binary vars, one pair region: unary slots 0-3, pair offset 4.
        let g = RegionGraph::new(vec![2, 2], vec![vec![0, 1]]).unwrap();
        assert_eq!(g.flat_index(0, &[1]).unwrap(), 1);
        assert_eq!(g.flat_index(1, &[0]).unwrap(), 2);
        assert_eq!(g.flat_index(2, &[1, 0]).unwrap(), 4 + 2);
    }

    #[test]
    fn flat_index_chain_unary() {
        let g = RegionGraph::build_chain(5, 26).unwrap();
        assert_eq!(g.flat_index(2, &[7]).unwrap(), 2 * 26 + 7);
    }

    #[test]
    fn flat_index_out_of_range_label() {
        let g = RegionGraph::build_chain(2, 3).unwrap();
        assert!(g.flat_index(0, &[3]).is_err());
        assert!(g.flat_index(2, &[0]).is_err()); // wrong arity
    }

    #[test]
    fn slot_round_trip_is_identity() {
        let g = RegionGraph::new(vec![2, 3, 2], vec![vec![0, 1], vec![0, 1, 2]]).unwrap();
        for slot in 0..g.total_slots() {
            let (r, local) = g.slot_to_assignment(slot).unwrap();
            assert_eq!(g.flat_index(r, &local).unwrap(), slot);
        }
    }

    #[test]
    fn mask_single_binary_var() {
        let g = RegionGraph::new(vec![2], vec![]).unwrap();
        let f = PotentialVector::from_values(vec![0.3, 0.7]);
        let m = g.mask(&f, &Assignment::new(vec![1])).unwrap();
        assert_eq!(m.values, vec![0.0, 0.7]);
    }

    #[test]
    fn mask_zero_vector_stays_zero() {
        let g = RegionGraph::build_chain(3, 2).unwrap();
        let f = PotentialVector::zeros(g.total_slots());
        for x in g.enumerate_assignments(100).unwrap() {
            let m = g.mask(&f, &x).unwrap();
            assert!(m.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mask_selects_one_slot_per_region_and_sums_to_direct_score() {
        // Independent summation oracle: walk regions and add table entries.
        let g = RegionGraph::new(vec![3, 2, 2], vec![vec![0, 1], vec![1, 2]]).unwrap();
        let mut rng = crate::rng::stream(7, 0, 0);
        let f = PotentialVector::from_values(
            (0..g.total_slots()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect(),
        );
        for x in g.enumerate_assignments(100).unwrap() {
            let m = g.mask(&f, &x).unwrap();
            let nonzero_eligible = (0..g.num_regions())
                .map(|r| g.selected_slot(r, &x))
                .collect::<std::collections::HashSet<_>>();
            for (slot, &v) in m.values.iter().enumerate() {
                if !nonzero_eligible.contains(&slot) {
                    assert_eq!(v, 0.0);
                }
            }
            // Oracle: direct sum over region tables.
            let mut direct = 0.0;
            for r in 0..g.num_regions() {
                let local: Vec<usize> =
                    g.region(r).vars.iter().map(|&v| x.labels[v]).collect();
                direct += f.values[g.flat_index(r, &local).unwrap()];
            }
            let ones = PotentialVector::constant(g.total_slots(), 1.0);
            assert!((m.dot(&ones) - direct).abs() < 1e-12);
            assert!((g.score_decomposed(&f, &x).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_idempotent_and_linear() {
        let g = RegionGraph::build_chain(4, 3).unwrap();
        let mut rng = crate::rng::stream(11, 0, 0);
        let f = PotentialVector::from_values(
            (0..g.total_slots()).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect(),
        );
        let gvec = PotentialVector::from_values(
            (0..g.total_slots()).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect(),
        );
        let x = Assignment::new(vec![2, 0, 1, 2]);
        let m = g.mask(&f, &x).unwrap();
        assert_eq!(g.mask(&m, &x).unwrap(), m);
        // Linearity: mask(f+g) = mask(f) + mask(g).
        let sum = PotentialVector::from_values(
            f.values.iter().zip(&gvec.values).map(|(a, b)| a + b).collect(),
        );
        let ms = g.mask(&sum, &x).unwrap();
        let mg = g.mask(&gvec, &x).unwrap();
        for i in 0..ms.len() {
            assert!((ms.values[i] - (m.values[i] + mg.values[i])).abs() < 1e-12);
        }
        // Additivity of the decomposed score.
        let sf = g.score_decomposed(&f, &x).unwrap();
        let sg = g.score_decomposed(&gvec, &x).unwrap();
        let ss = g.score_decomposed(&sum, &x).unwrap();
        assert!((ss - (sf + sg)).abs() < 1e-12);
    }

    #[test]
    fn score_single_unary_region() {
        let g = RegionGraph::new(vec![2], vec![]).unwrap();
        let f = PotentialVector::from_values(vec![1.0, 2.0]);
        assert_eq!(g.score_decomposed(&f, &Assignment::new(vec![0])).unwrap(), 1.0);
    }

    #[test]
    fn invalid_regions_rejected() {
        assert!(RegionGraph::new(vec![2, 2], vec![vec![1, 0]]).is_err()); // not ascending
        assert!(RegionGraph::new(vec![2, 2], vec![vec![0, 0]]).is_err()); // duplicate var
        assert!(RegionGraph::new(vec![2, 2], vec![vec![0, 2]]).is_err()); // out of range
        assert!(RegionGraph::new(vec![2, 2], vec![vec![0, 1], vec![0, 1]]).is_err()); // dup region
        assert!(RegionGraph::new(vec![2, 2], vec![vec![0]]).is_err()); // arity 1
        assert!(RegionGraph::new(vec![], vec![]).is_err());
    }

    #[test]
    fn description_round_trip() {
        let g = RegionGraph::build_second_order(4, 3).unwrap();
        let text = g.description();
        let parsed = RegionGraph::parse_description(&text).unwrap();
        assert_eq!(parsed, g);
        assert!(RegionGraph::parse_description("vars=2;domains=2,2;regions=(0,1").is_err());
        assert!(RegionGraph::parse_description("bogus=1").is_err());
    }
}
