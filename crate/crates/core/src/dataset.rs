//! NL-FL pair records, direction mirroring, ratio mixing and statistics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DeclKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    NlToFl,
    FlToNl,
    /// General-domain instruction data, which has no translation direction.
    Instruction,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::NlToFl => "nl_to_fl",
            Direction::FlToNl => "fl_to_nl",
            Direction::Instruction => "instruction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    TacticAug,
    InformalAug,
    General,
}

impl Provenance {
    pub const ALL: [Provenance; 4] =
        [Provenance::Original, Provenance::TacticAug, Provenance::InformalAug, Provenance::General];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::TacticAug => "tactic_aug",
            Provenance::InformalAug => "informal_aug",
            Provenance::General => "general",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordType {
    #[default]
    Statement,
    Proof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NLFLPair {
    pub id: String,
    pub formal_text: String,
    pub informal_text: String,
    pub direction: Direction,
    pub provenance: Provenance,
    pub source_name: Option<String>,
    pub level: Option<u32>,
    #[serde(default)]
    pub kind: Option<DeclKind>,
    #[serde(default)]
    pub record_type: RecordType,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("pair `{0}` has an empty text field")]
    EmptyText(String),
    #[error("pair `{id}` has direction {found}, expected nl_to_fl")]
    NotForward { id: String, found: &'static str },
    #[error("pool `{0}` is empty")]
    EmptyPool(&'static str),
    #[error("pool `{pool}` holds a `{found}` pair")]
    WrongProvenance { pool: &'static str, found: &'static str },
    #[error("invalid ratio `{0}`: expected three positive integers like 1:2:1")]
    InvalidRatio(String),
}

impl NLFLPair {
    /// Non-empty texts, except that instruction data may lack a formal side.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let formal_ok = !self.formal_text.trim().is_empty() || self.direction == Direction::Instruction;
        if !formal_ok || self.informal_text.trim().is_empty() {
            return Err(DatasetError::EmptyText(self.id.clone()));
        }
        Ok(())
    }
}

/// Each forward pair followed by its reverse (`id` + `_rev`). Every input
/// must be `nl_to_fl`, so mirrored output cannot be mirrored again.
pub fn mirror_directions(pairs: &[NLFLPair]) -> Result<Vec<NLFLPair>, DatasetError> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        if p.direction != Direction::NlToFl {
            return Err(DatasetError::NotForward { id: p.id.clone(), found: p.direction.as_str() });
        }
        out.push(p.clone());
        out.push(reversed(p));
    }
    Ok(out)
}

fn reversed(p: &NLFLPair) -> NLFLPair {
    NLFLPair { id: alloc::format!("{}_rev", p.id), direction: Direction::FlToNl, ..p.clone() }
}

/// Largest-remainder apportionment of `total` by integer `weights`; ties in
/// the remainder go to the lower index. Exact integer arithmetic.
pub fn allocate(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| u128::from(w)).sum();
    if sum == 0 {
        return alloc::vec![0; weights.len()];
    }
    let t = u128::from(total);
    let mut out: Vec<u64> = weights.iter().map(|&w| (t * u128::from(w) / sum) as u64).collect();
    let mut order: Vec<(u128, usize)> =
        weights.iter().enumerate().map(|(i, &w)| (t * u128::from(w) % sum, i)).collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let assigned: u64 = out.iter().sum();
    for &(_, i) in order.iter().take((total - assigned) as usize) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ratio3(pub [u64; 3]);

impl Ratio3 {
    pub const PROVENANCE_DEFAULT: Ratio3 = Ratio3([1, 2, 1]);
    pub const DIRECTION_DEFAULT: Ratio3 = Ratio3([2, 2, 1]);

    pub fn sum(self) -> u64 {
        self.0.iter().sum()
    }
}

impl FromStr for Ratio3 {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::InvalidRatio(s.into());
        let parts: Vec<u64> = s.split(':').map(|p| p.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c] if a > 0 && b > 0 && c > 0 => Ok(Ratio3([a, b, c])),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Ratio3 {
    type Error = DatasetError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ratio3> for String {
    fn from(r: Ratio3) -> Self {
        r.to_string()
    }
}

impl fmt::Display for Ratio3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixSpec {
    /// original : tactic_aug : informal_aug, over forward pairs.
    pub provenance: Ratio3,
    /// nl_to_fl : fl_to_nl : general, over emitted records.
    pub directions: Ratio3,
    pub total: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct MixPools<'a> {
    pub original: &'a [NLFLPair],
    pub tactic_aug: &'a [NLFLPair],
    pub informal_aug: &'a [NLFLPair],
    pub general: &'a [NLFLPair],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixManifest {
    /// Emitted records per provenance.
    pub counts: BTreeMap<Provenance, u64>,
    /// Emitted records per direction.
    pub direction_counts: BTreeMap<Direction, u64>,
    /// Forward pairs drawn from each statement pool before mirroring.
    pub pair_counts: BTreeMap<Provenance, u64>,
    pub seed: u64,
    pub ratio_spec: String,
    pub total: u64,
    pub requested_total: u64,
    pub scaled_down: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Plan {
    directions: [u64; 3],
    pairs: [u64; 3],
}

fn plan(total: u64, spec: &MixSpec) -> Plan {
    let d = allocate(total, &spec.directions.0);
    let forward = d[0].max(d[1]);
    let p = allocate(forward, &spec.provenance.0);
    Plan { directions: [d[0], d[1], d[2]], pairs: [p[0], p[1], p[2]] }
}

fn fits(plan: &Plan, sizes: [usize; 3], general: usize) -> bool {
    plan.pairs.iter().zip(sizes).all(|(&want, have)| want <= have as u64) && plan.directions[2] <= general as u64
}

fn shuffled(pool: &[NLFLPair], seed: u64, stream: u64) -> Vec<&NLFLPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut v: Vec<&NLFLPair> = pool.iter().collect();
    v.shuffle(&mut rng);
    v
}

/// Draws a training mixture. The provenance ratio is realised over forward
/// pairs, which are then mirrored; the direction ratio is realised over
/// emitted records. When a pool is too small the total shrinks to the
/// largest size every pool can serve.
pub fn mix(pools: MixPools<'_>, spec: &MixSpec) -> Result<(Vec<NLFLPair>, MixManifest), DatasetError> {
    let named = [
        ("original", Provenance::Original, pools.original),
        ("tactic_aug", Provenance::TacticAug, pools.tactic_aug),
        ("informal_aug", Provenance::InformalAug, pools.informal_aug),
        ("general", Provenance::General, pools.general),
    ];
    for (name, prov, pool) in named {
        if pool.is_empty() {
            return Err(DatasetError::EmptyPool(name));
        }
        if let Some(p) = pool.iter().find(|p| p.provenance != prov) {
            return Err(DatasetError::WrongProvenance { pool: name, found: p.provenance.as_str() });
        }
        if prov != Provenance::General {
            if let Some(p) = pool.iter().find(|p| p.direction != Direction::NlToFl) {
                return Err(DatasetError::NotForward { id: p.id.clone(), found: p.direction.as_str() });
            }
        }
    }
    let sizes = [pools.original.len(), pools.tactic_aug.len(), pools.informal_aug.len()];

    // upper bound from the ideal shares, then walk down to an exact fit
    let w = spec.provenance.0;
    let dw = spec.directions.0;
    let dsum = spec.directions.sum() as u128;
    let fwd_share = dw[0].max(dw[1]) as u128;
    let mut bound = u128::from(spec.total);
    for i in 0..3 {
        let max_fwd = (sizes[i] as u128 + 1) * spec.provenance.sum() as u128 / w[i] as u128 + 1;
        bound = bound.min(max_fwd * dsum / fwd_share + 2);
    }
    bound = bound.min((pools.general.len() as u128 + 1) * dsum / dw[2] as u128 + 2);
    let mut total = (bound as u64).min(spec.total);
    let mut chosen = plan(total, spec);
    while !fits(&chosen, sizes, pools.general.len()) {
        total -= 1;
        chosen = plan(total, spec);
    }

    let mut forward: Vec<&NLFLPair> = Vec::new();
    let mut pair_counts = BTreeMap::new();
    for (i, (_, prov, pool)) in named.iter().take(3).enumerate() {
        let take = chosen.pairs[i] as usize;
        forward.extend(shuffled(pool, spec.seed, i as u64).into_iter().take(take));
        pair_counts.insert(*prov, take as u64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(10);
    forward.shuffle(&mut rng);

    let mut out: Vec<NLFLPair> = Vec::with_capacity(total as usize);
    out.extend(forward.iter().take(chosen.directions[0] as usize).map(|p| (*p).clone()));
    out.extend(forward.iter().take(chosen.directions[1] as usize).map(|p| reversed(p)));
    out.extend(shuffled(pools.general, spec.seed, 3).into_iter().take(chosen.directions[2] as usize).cloned());
    rng.set_stream(11);
    out.shuffle(&mut rng);

    let mut counts: BTreeMap<Provenance, u64> = BTreeMap::new();
    let mut direction_counts: BTreeMap<Direction, u64> = BTreeMap::new();
    for p in &out {
        *counts.entry(p.provenance).or_default() += 1;
        *direction_counts.entry(p.direction).or_default() += 1;
    }
    let manifest = MixManifest {
        counts,
        direction_counts,
        pair_counts,
        seed: spec.seed,
        ratio_spec: alloc::format!(
            "provenance {} (original:tactic_aug:informal_aug) over forward pairs before mirroring; \
             directions {} (nl_to_fl:fl_to_nl:general) over emitted records",
            spec.provenance, spec.directions
        ),
        total: out.len() as u64,
        requested_total: spec.total,
        scaled_down: total < spec.total,
    };
    Ok((out, manifest))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: u64,
    pub by_provenance: BTreeMap<String, u64>,
    pub by_direction: BTreeMap<String, u64>,
    pub by_kind: BTreeMap<String, u64>,
    pub by_record_type: BTreeMap<String, u64>,
    /// Level histogram; records without a level are counted under `none`.
    pub levels: BTreeMap<String, u64>,
}

impl DatasetStats {
    pub fn add(&mut self, p: &NLFLPair) {
        self.total += 1;
        *self.by_provenance.entry(p.provenance.as_str().into()).or_default() += 1;
        *self.by_direction.entry(p.direction.as_str().into()).or_default() += 1;
        let kind = p.kind.map_or("unknown", DeclKind::as_str);
        *self.by_kind.entry(kind.into()).or_default() += 1;
        let rt = match p.record_type {
            RecordType::Statement => "statement",
            RecordType::Proof => "proof",
        };
        *self.by_record_type.entry(rt.into()).or_default() += 1;
        let level = p.level.map_or_else(|| "none".to_string(), |l| alloc::format!("{l:04}"));
        *self.levels.entry(level).or_default() += 1;
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a NLFLPair>) -> Self {
        let mut s = DatasetStats::default();
        for p in pairs {
            s.add(p);
        }
        s
    }

    fn get(map: &BTreeMap<String, u64>, key: &str) -> u64 {
        map.get(key).copied().unwrap_or(0)
    }

    /// Headline columns: original statements, augmented statements, proofs
    /// and general records.
    pub fn render_table(&self) -> String {
        let proofs = Self::get(&self.by_record_type, "proof");
        let augmented = Self::get(&self.by_provenance, "tactic_aug") + Self::get(&self.by_provenance, "informal_aug");
        let general = Self::get(&self.by_provenance, "general");
        let original = Self::get(&self.by_provenance, "original").saturating_sub(proofs);
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10}", "", "Original", "Augmented", "Proofs", "General", "Total");
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "Number of NL-FL pairs", original, augmented, proofs, general, self.total
        );
        let sections: [(&str, &BTreeMap<String, u64>); 4] = [
            ("direction", &self.by_direction),
            ("provenance", &self.by_provenance),
            ("kind", &self.by_kind),
            ("level", &self.levels),
        ];
        for (title, map) in sections {
            let _ = writeln!(out, "\nby {title}:");
            for (k, v) in map {
                let _ = writeln!(out, "  {k:<22} {v:>10}");
            }
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn spec(total: u64, seed: u64) -> MixSpec {
        MixSpec { provenance: Ratio3::PROVENANCE_DEFAULT, directions: Ratio3::DIRECTION_DEFAULT, total, seed }
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate(200, &[1, 2, 1]), vec![50, 100, 50]);
        assert_eq!(allocate(500, &[2, 2, 1]), vec![200, 200, 100]);
        assert_eq!(allocate(7, &[1, 1, 1]), vec![3, 2, 2]);
        assert_eq!(allocate(0, &[1, 2, 1]), vec![0, 0, 0]);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("1:2:1".parse::<Ratio3>().unwrap(), Ratio3([1, 2, 1]));
        for bad in ["1:2", "0:1:1", "a:b:c", "1:2:1:1", ""] {
            assert!(bad.parse::<Ratio3>().is_err(), "{bad}");
        }
    }

    #[test]
    fn mirroring() {
        let out = mirror_directions(&[pair("a", Provenance::Original)]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!((out[1].id.as_str(), out[1].direction), ("a_rev", Direction::FlToNl));
        assert!(mirror_directions(&[]).unwrap().is_empty());
        assert!(matches!(mirror_directions(&out), Err(DatasetError::NotForward { .. })));
    }

    #[test]
    fn provenance_split_for_two_hundred_pairs() {
        let (o, t, i, g) = (pool("o", Provenance::Original, 100), pool("t", Provenance::TacticAug, 100), pool("i", Provenance::InformalAug, 100), pool("g", Provenance::General, 100));
        let pools = MixPools { original: &o, tactic_aug: &t, informal_aug: &i, general: &g };
        // 2:2:1 over 500 emitted gives 200 forward pairs
        let (out, m) = mix(pools, &spec(500, 1)).unwrap();
        assert_eq!(out.len(), 500);
        let pc: Vec<u64> = m.pair_counts.values().copied().collect();
        assert_eq!(pc, vec![50, 100, 50]);
        let dc: Vec<(Direction, u64)> = m.direction_counts.clone().into_iter().collect();
        assert_eq!(dc, vec![(Direction::NlToFl, 200), (Direction::FlToNl, 200), (Direction::Instruction, 100)]);
        assert!(!m.scaled_down);
        assert_eq!(mix(pools, &spec(500, 1)).unwrap(), (out, m));
    }

    #[test]
    fn small_pools_scale_down() {
        let (o, t, i, g) = (pool("o", Provenance::Original, 10), pool("t", Provenance::TacticAug, 100), pool("i", Provenance::InformalAug, 100), pool("g", Provenance::General, 100));
        let (out, m) = mix(MixPools { original: &o, tactic_aug: &t, informal_aug: &i, general: &g }, &spec(500, 3)).unwrap();
        assert!(m.scaled_down);
        assert_eq!(m.total, out.len() as u64);
        assert!(m.pair_counts[&Provenance::Original] <= 10);
        // one more record would not fit
        let next = plan(m.total + 1, &spec(0, 0));
        assert!(!fits(&next, [10, 100, 100], 100) || m.total + 1 > 500);
    }

    #[test]
    fn mix_rejects_empty_and_mislabelled_pools() {
        let (o, g) = (pool("o", Provenance::Original, 5), pool("g", Provenance::General, 5));
        let empty: Vec<NLFLPair> = vec![];
        let r = mix(MixPools { original: &o, tactic_aug: &empty, informal_aug: &o, general: &g }, &spec(10, 0));
        assert_eq!(r.unwrap_err(), DatasetError::EmptyPool("tactic_aug"));
        let r = mix(MixPools { original: &o, tactic_aug: &o, informal_aug: &o, general: &g }, &spec(10, 0));
        assert!(matches!(r, Err(DatasetError::WrongProvenance { pool: "tactic_aug", .. })));
    }

    #[test]
    fn stats_and_table() {
        let mut ps = pool("o", Provenance::Original, 3);
        ps[0].record_type = RecordType::Proof;
        ps[1].level = Some(2);
        ps.extend(pool("t", Provenance::TacticAug, 2));
        let s = DatasetStats::from_pairs(&ps);
        assert_eq!(s.total, 5);
        assert_eq!(s.levels["0002"], 1);
        let table = s.render_table();
        assert!(table.contains("Number of NL-FL pairs"));
        let row = table.lines().nth(1).unwrap();
        let nums: Vec<&str> = row.split_whitespace().rev().take(5).collect();
        assert_eq!(nums, vec!["5", "0", "1", "2", "2"]);
        assert_eq!(DatasetStats::from_pairs(&[]).total, 0);
    }

    #[test]
    fn pair_validation() {
        assert!(pair("g", Provenance::General).validate().is_ok());
        let mut p = pair("x", Provenance::Original);
        p.formal_text.clear();
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn allocation_is_within_one(total in 0u64..100_000, w in proptest::collection::vec(1u64..20, 1..6)) {
            let got = allocate(total, &w);
            let sum: u64 = w.iter().sum();
            prop_assert_eq!(got.iter().sum::<u64>(), total);
            for (g, wi) in got.iter().zip(&w) {
                let ideal = total as f64 * *wi as f64 / sum as f64;
                prop_assert!((*g as f64 - ideal).abs() < 1.0);
            }
        }

        #[test]
        fn mix_realises_ratios(
            sizes in proptest::array::uniform4(1usize..120),
            total in 1u64..400,
            seed in any::<u64>(),
        ) {
            let (o, t, i, g) = (
                pool("o", Provenance::Original, sizes[0]),
                pool("t", Provenance::TacticAug, sizes[1]),
                pool("i", Provenance::InformalAug, sizes[2]),
                pool("g", Provenance::General, sizes[3]),
            );
            let (out, m) = mix(MixPools { original: &o, tactic_aug: &t, informal_aug: &i, general: &g }, &spec(total, seed)).unwrap();
            prop_assert_eq!(m.total, out.len() as u64);
            prop_assert_eq!(m.counts.values().sum::<u64>(), m.total);
            let dirs: Vec<u64> = [Direction::NlToFl, Direction::FlToNl, Direction::Instruction]
                .iter().map(|d| m.direction_counts.get(d).copied().unwrap_or(0)).collect();
            for (got, wi) in dirs.iter().zip([2.0, 2.0, 1.0]) {
                prop_assert!((*got as f64 - m.total as f64 * wi / 5.0).abs() <= 1.0);
            }
            let fwd = m.pair_counts.values().sum::<u64>() as f64;
            for (prov, wi) in [(Provenance::Original, 1.0), (Provenance::TacticAug, 2.0), (Provenance::InformalAug, 1.0)] {
                prop_assert!((m.pair_counts[&prov] as f64 - fwd * wi / 4.0).abs() <= 1.0);
            }
            let ids: alloc::collections::BTreeSet<&str> = out.iter().map(|p| p.id.as_str()).collect();
            prop_assert_eq!(ids.len(), out.len());
        }

        #[test]
        fn mirror_twice_is_rejected(n in 1usize..20) {
            let once = mirror_directions(&pool("p", Provenance::Original, n)).unwrap();
            prop_assert_eq!(once.len(), 2 * n);
            prop_assert!(mirror_directions(&once).is_err());
        }
    }
}
