//! Branch-flow AC model: directed link set, variable layout and a symbolic
//! list of constraint families for external tooling. Nothing here solves it.

use std::collections::VecDeque;

use serde::Serialize;

use super::network::NetworkData;
use crate::error::{check_dim, Error, Result};
use crate::linear_map::Vector;

/// Pseudo-bus feeding the slack generator.
pub const SOURCE: usize = 0;

/// Directed link `from -> to` between 1-based bus labels; `from = 0` is the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

/// Index map of
/// `x = [P_G(|M|), Q_G(|M|), v(n), I(|E|), P(|E|), Q(|E|), P_PV(n), Q_PV(n), X(n)]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcLayout {
    pub n_buses: usize,
    pub n_generators: usize,
    pub n_links: usize,
}

impl AcLayout {
    /// Block names and lengths, in order.
    pub fn blocks(&self) -> [(&'static str, usize); 9] {
        let (n, m, e) = (self.n_buses, self.n_generators, self.n_links);
        [
            ("P_G", m),
            ("Q_G", m),
            ("v", n),
            ("I_sq", e),
            ("P_link", e),
            ("Q_link", e),
            ("P_PV", n),
            ("Q_PV", n),
            ("X", n),
        ]
    }

    pub fn dim(&self) -> usize {
        self.blocks().iter().map(|b| b.1).sum()
    }

    /// Start offset of a named block.
    pub fn offset(&self, block: &str) -> Option<usize> {
        let mut at = 0;
        for (name, len) in self.blocks() {
            if name == block {
                return Some(at);
            }
            at += len;
        }
        None
    }

    /// Splits `x` into its blocks.
    pub fn unpack(&self, x: &Vector) -> Result<Vec<(&'static str, Vector)>> {
        check_dim(self.dim(), x.len())?;
        let mut at = 0;
        Ok(self
            .blocks()
            .into_iter()
            .map(|(name, len)| {
                let v = x.rows(at, len).into_owned();
                at += len;
                (name, v)
            })
            .collect())
    }

    pub fn pack(&self, blocks: &[(&str, Vector)]) -> Result<Vector> {
        let layout = self.blocks();
        check_dim(layout.len(), blocks.len())?;
        let mut out = Vec::with_capacity(self.dim());
        for ((name, len), (given, v)) in layout.iter().zip(blocks) {
            if name != given {
                return Err(Error::InvalidArgument(format!("expected block `{name}`, got `{given}`")));
            }
            check_dim(*len, v.len())?;
            out.extend(v.iter());
        }
        Ok(Vector::from_vec(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equality,
    Inequality,
    /// Two-sided bound; counts as two scalar inequalities.
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintFamily {
    pub name: &'static str,
    pub expression: &'static str,
    pub relation: Relation,
    /// Number of instances (links or buses).
    pub count: usize,
    pub convex: bool,
}

impl ConstraintFamily {
    /// Scalar rows this family contributes.
    pub fn rows(&self) -> usize {
        match self.relation {
            Relation::Range => 2 * self.count,
            _ => self.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcModel {
    pub links: Vec<Link>,
    pub layout: AcLayout,
    pub constraints: Vec<ConstraintFamily>,
}

impl AcModel {
    pub fn constraint_rows(&self) -> usize {
        self.constraints.iter().map(ConstraintFamily::rows).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Orients the line graph as a breadth-first arborescence from the slack bus,
/// preceded by the source link `(0, slack)`; neighbours are visited in
/// increasing label order.
pub fn directed_links(net: &NetworkData) -> Result<Vec<Link>> {
    let n = net.n_buses();
    let slack = net.generator_buses[0];
    let mut links = vec![Link {
        from: SOURCE,
        to: slack + 1,
    }];
    let mut seen = vec![false; n];
    seen[slack] = true;
    let mut queue = VecDeque::from([slack]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && net.susceptance[(i, j)] != 0.0 {
                seen[j] = true;
                links.push(Link { from: i + 1, to: j + 1 });
                queue.push_back(j);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("link set does not span the network: bus {} unreachable", i + 1)));
    }
    if net.lines().len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "branch-flow model needs a radial network; {} lines on {n} buses",
            net.lines().len()
        )));
    }
    Ok(links)
}

/// Builds the link set, layout and constraint families.
///
/// The source link has no sending-end bus in the network; its sending-end
/// voltage is treated as a fixed parameter.
pub fn load_ac_model(net: &NetworkData) -> Result<AcModel> {
    let links = directed_links(net)?;
    let n = net.n_buses();
    let e = links.len();
    let m = net.generator_buses.len();
    let into_gen = links
        .iter()
        .filter(|l| net.is_generator(l.to - 1))
        .count();
    let into_load = e - into_gen;
    use Relation::*;
    let fam = |name, expression, relation, count, convex| ConstraintFamily {
        name,
        expression,
        relation,
        count,
        convex,
    };
    let constraints = vec![
        fam("source-link", "P_{0,s} = Q_{0,s} = 0", Equality, 2, true),
        fam("active-balance-gen", "P_ij + P_PV_j + P_G_j - D_j = sum_k P_jk", Equality, into_gen, true),
        fam("reactive-balance-gen", "Q_ij + Q_PV_j + Q_G_j - DQ_j = sum_k Q_jk", Equality, into_gen, true),
        fam("active-balance", "P_ij + P_PV_j - r_ij I_ij - D_j = sum_k P_jk", Equality, into_load, true),
        fam("reactive-balance", "Q_ij + Q_PV_j - x_ij I_ij - DQ_j = sum_k Q_jk", Equality, into_load, true),
        fam("penetration", "sum P_PV >= 0.5 sum D", Inequality, 1, true),
        fam("pv-active", "0 <= P_PV_j <= X_j PV_P_max", Range, n, true),
        fam("pv-reactive", "0 <= Q_PV_j <= X_j PV_Q_max", Range, n, true),
        fam("voltage-drop", "v_j = v_i - 2 (r_ij P_ij + x_ij Q_ij) + (r_ij^2 + x_ij^2) I_ij", Equality, e, true),
        fam("branch-power", "I_ij v_i = P_ij^2 + Q_ij^2", Equality, e, false),
        fam("voltage-bounds", "V_min^2 <= v_i <= V_max^2", Range, n, true),
        fam("current-bounds", "I_min^2 <= I_ij <= I_max^2", Range, e, true),
        fam("line-active", "|P_ij| <= P_max", Range, e, true),
        fam("line-reactive", "|Q_ij| <= Q_max", Range, e, true),
        fam("gen-active", "0 <= P_G_j <= PG_max", Range, m, true),
        fam("gen-reactive", "0 <= Q_G_j <= QG_max", Range, m, true),
        fam("placement", "0 <= X_j <= 1", Range, n, true),
    ];
    Ok(AcModel {
        layout: AcLayout {
            n_buses: n,
            n_generators: m,
            n_links: e,
        },
        links,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_link_set() {
        let model = load_ac_model(&NetworkData::bundled()).unwrap();
        assert_eq!(model.links.len(), 14);
        assert_eq!(model.links[0], Link { from: 0, to: 11 });
        assert_eq!(model.links[1], Link { from: 11, to: 10 });
        // Every bus has exactly one incoming link.
        let mut indeg = [0; 15];
        for l in &model.links {
            indeg[l.to] += 1;
        }
        assert!(indeg[1..].iter().all(|&d| d == 1));
        assert_eq!(model.layout.dim(), 100);
    }

    #[test]
    fn layout_round_trip() {
        let layout = load_ac_model(&NetworkData::bundled()).unwrap().layout;
        let x = Vector::from_fn(layout.dim(), |i, _| i as f64);
        let blocks = layout.unpack(&x).unwrap();
        let refs: Vec<(&str, Vector)> = blocks.iter().map(|(n, v)| (*n, v.clone())).collect();
        assert_eq!(layout.pack(&refs).unwrap(), x);
        assert_eq!(layout.offset("X"), Some(86));
    }

    #[test]
    fn serializes() {
        let json = load_ac_model(&NetworkData::bundled()).unwrap().to_json().unwrap();
        assert!(json.contains("branch-power"));
    }
}
