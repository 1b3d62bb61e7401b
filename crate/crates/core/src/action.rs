//! Finite (semi-)group actions on inputs and outputs.
//!
//! A [`GroupAction`] is a finite list of named elements, each carrying an
//! input transform (`g · x`) and a linear output transform (`g ⋆ y`).
//! Element 0 is always the identity. Built-in constructors cover the planar
//! quarter-turn actions, the dihedral group of a square image, and pairs of
//! (signed) permutation matrices; arbitrary actions can be registered with
//! closures. Built-ins can also be described declaratively in JSON via
//! [`ActionSpec`].

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// User-registered vector map.
pub type CustomMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A single linear map applied to input or output vectors.
#[derive(Clone)]
pub enum Transform {
    Identity,
    /// `y[i] = signs[i] * x[perm[i]]` on the first `perm.len()` coordinates;
    /// coordinates beyond that pass through unchanged.
    SignedPermutation { perm: Vec<usize>, signs: Vec<f64> },
    /// A square-image symmetry on a flattened `side × side` grid, row-major:
    /// `quarter_turns` counter-clockwise rotations followed by an optional
    /// horizontal flip (mirror across the vertical centre line).
    ImageOp { side: usize, quarter_turns: u8, flip: bool },
    /// User-registered map. Must be linear for output actions.
    Custom { name: String, f: CustomMap },
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => write!(f, "identity"),
            Transform::SignedPermutation { perm, signs } => {
                write!(f, "signed-permutation(perm={perm:?}, signs={signs:?})")
            }
            Transform::ImageOp { side, quarter_turns, flip } => {
                write!(f, "image-op(side={side}, turns={quarter_turns}, flip={flip})")
            }
            Transform::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

impl Transform {
    fn min_dim(&self) -> usize {
        match self {
            Transform::Identity | Transform::Custom { .. } => 0,
            Transform::SignedPermutation { perm, .. } => perm.len(),
            Transform::ImageOp { side, .. } => side * side,
        }
    }

    fn exact_dim(&self) -> Option<usize> {
        match self {
            Transform::ImageOp { side, .. } => Some(side * side),
            _ => None,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(d) = self.exact_dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "transform needs dimension {d}, got {}",
                    x.len()
                )));
            }
        } else if x.len() < self.min_dim() {
            return Err(Error::DimensionMismatch(format!(
                "transform needs dimension ≥ {}, got {}",
                self.min_dim(),
                x.len()
            )));
        }
        Ok(match self {
            Transform::Identity => x.to_vec(),
            Transform::SignedPermutation { perm, signs } => {
                let mut out = x.to_vec();
                for i in 0..perm.len() {
                    out[i] = signs[i] * x[perm[i]];
                }
                out
            }
            Transform::ImageOp { side, quarter_turns, flip } => {
                let s = *side;
                let mut img = x.to_vec();
                for _ in 0..(*quarter_turns % 4) {
                    img = rotate_ccw(&img, s);
                }
                if *flip {
                    img = flip_horizontal(&img, s);
                }
                img
            }
            Transform::Custom { f, .. } => f(x),
        })
    }

    /// Structural equality for built-in transforms; custom maps never match.
    fn same_structure(&self, other: &Transform) -> bool {
        match (self, other) {
            (Transform::Identity, Transform::Identity) => true,
            (
                Transform::SignedPermutation { perm: p1, signs: s1 },
                Transform::SignedPermutation { perm: p2, signs: s2 },
            ) => p1 == p2 && s1 == s2,
            (
                Transform::ImageOp { side: a1, quarter_turns: q1, flip: f1 },
                Transform::ImageOp { side: a2, quarter_turns: q2, flip: f2 },
            ) => a1 == a2 && q1 == q2 && f1 == f2,
            _ => false,
        }
    }
}

/// 90° counter-clockwise rotation of a flattened row-major square image.
fn rotate_ccw(img: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; img.len()];
    for r in 0..side {
        for c in 0..side {
            out[r * side + c] = img[c * side + (side - 1 - r)];
        }
    }
    out
}

/// Mirror across the vertical centre line (column reversal).
fn flip_horizontal(img: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; img.len()];
    for r in 0..side {
        for c in 0..side {
            out[r * side + c] = img[r * side + (side - 1 - c)];
        }
    }
    out
}

/// `a ∘ b` (apply `b` first) for structurally composable transforms.
fn compose_transforms(a: &Transform, b: &Transform) -> Option<Transform> {
    match (a, b) {
        (Transform::Identity, t) | (t, Transform::Identity) => Some(t.clone()),
        (
            Transform::SignedPermutation { perm: pa, signs: sa },
            Transform::SignedPermutation { perm: pb, signs: sb },
        ) => {
            let n = pa.len().max(pb.len());
            let get = |perm: &[usize], i: usize| if i < perm.len() { perm[i] } else { i };
            let sign = |signs: &[f64], i: usize| if i < signs.len() { signs[i] } else { 1.0 };
            let mut perm = Vec::with_capacity(n);
            let mut signs = Vec::with_capacity(n);
            for i in 0..n {
                let mid = get(pa, i);
                perm.push(get(pb, mid));
                signs.push(sign(sa, i) * sign(sb, mid));
            }
            if perm.iter().enumerate().all(|(i, &p)| i == p) && signs.iter().all(|&s| s == 1.0) {
                Some(Transform::Identity)
            } else {
                Some(Transform::SignedPermutation { perm, signs })
            }
        }
        (
            Transform::ImageOp { side: s1, quarter_turns: q1, flip: f1 },
            Transform::ImageOp { side: s2, quarter_turns: q2, flip: f2 },
        ) if s1 == s2 => {
            // Elements are canonically flip ∘ rot^q. Pushing b's flip past
            // a's rotations inverts them: rot ∘ flip = flip ∘ rot⁻¹.
            let q_a = if *f2 { (4 - *q1 % 4) % 4 } else { *q1 % 4 };
            Some(Transform::ImageOp {
                side: *s1,
                quarter_turns: (q_a + *q2 % 4) % 4,
                flip: *f1 ^ *f2,
            })
        }
        _ => None,
    }
}

/// A named element of a group action.
#[derive(Debug, Clone)]
pub struct Element {
    pub name: String,
    pub input: Transform,
    pub output: Transform,
}

/// How element composition is resolved for [`GroupAction::compose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompositionLaw {
    /// Element `k` is the k-th power of one generator: `g ∘ h = g + h (mod n)`.
    Cyclic,
    /// Look the composed transform up by structure (distinct per element).
    Structural,
    /// Not available (user-registered closures).
    Unavailable,
}

/// A finite action on inputs and (linearly) on outputs.
///
/// Element 0 is the identity `e`.
#[derive(Debug, Clone)]
pub struct GroupAction {
    kind: String,
    elements: Vec<Element>,
    default_support: Vec<usize>,
    law: CompositionLaw,
    echo: serde_json::Value,
}

impl GroupAction {
    /// Quarter-turn action on the first two input coordinates:
    /// `R · x = (−x₂, x₁, x₃, …)`, trivial on outputs. Elements
    /// `{e, R, R2, R3}`.
    pub fn axis_rotation(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "axis rotation needs input dimension ≥ 2, got {dim}"
            )));
        }
        let r = Transform::SignedPermutation { perm: vec![1, 0], signs: vec![-1.0, 1.0] };
        Ok(Self::cyclic_powers("axis-rotation", "R", r, 4, dim))
    }

    /// Sign-flip variant: `R · x = (−x₁, −x₂, x₃, …)`, trivial on outputs.
    /// The group still has four elements `{e, R, R2, R3}`; `R2` happens to
    /// act as the identity map (the representation is not faithful), and
    /// sampling distributions are defined over elements, not maps.
    pub fn axis_rotation_sign_flip(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "axis rotation needs input dimension ≥ 2, got {dim}"
            )));
        }
        let r = Transform::SignedPermutation { perm: vec![0, 1], signs: vec![-1.0, -1.0] };
        Ok(Self::cyclic_powers("axis-rotation-sign-flip", "R", r, 4, dim))
    }

    /// Builds `{e, g, g², …, g^{order−1}}` regardless of whether some power
    /// acts as the identity map.
    fn cyclic_powers(kind: &str, gen_name: &str, r: Transform, order: usize, dim: usize) -> Self {
        let mut elements = vec![Element {
            name: "e".into(),
            input: Transform::Identity,
            output: Transform::Identity,
        }];
        let mut current = r.clone();
        for k in 1..order {
            let name = if k == 1 { gen_name.to_string() } else { format!("{gen_name}{k}") };
            elements.push(Element { name, input: current.clone(), output: Transform::Identity });
            current = compose_transforms(&r, &current).expect("built-in transforms compose");
        }
        let default_support = (1..elements.len()).collect();
        let echo = serde_json::json!({ "kind": kind, "dimension": dim });
        Self { kind: kind.into(), elements, default_support, law: CompositionLaw::Cyclic, echo }
    }

    /// The eight symmetries of a square `side × side` image: the rotation
    /// generator `a` (90° counter-clockwise), the horizontal reflection `b`,
    /// and their composites `{e, a, a2, a3, b, ba, ba2, ba3}` where `ba^k`
    /// applies `a^k` first. With `equivariant_output` the same symmetry is
    /// applied to (image-valued) outputs; otherwise outputs are untouched.
    pub fn image_d4(side: usize, equivariant_output: bool) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidConfig("image side must be positive".into()));
        }
        let mut elements = Vec::with_capacity(8);
        for flip in [false, true] {
            for q in 0u8..4 {
                let name = match (flip, q) {
                    (false, 0) => "e".to_string(),
                    (false, 1) => "a".to_string(),
                    (false, k) => format!("a{k}"),
                    (true, 0) => "b".to_string(),
                    (true, 1) => "ba".to_string(),
                    (true, k) => format!("ba{k}"),
                };
                let t = Transform::ImageOp { side, quarter_turns: q, flip };
                let output = if equivariant_output { t.clone() } else { Transform::Identity };
                elements.push(Element { name, input: t, output });
            }
        }
        // Non-identity powers of the declared generators a and b.
        let default_support = vec![1, 2, 3, 4];
        let echo = serde_json::json!({
            "kind": "image-d4",
            "side": side,
            "equivariant_output": equivariant_output,
        });
        Ok(Self {
            kind: "image-d4".into(),
            elements,
            default_support,
            law: CompositionLaw::Structural,
            echo,
        })
    }

    /// Cyclic action generated by a (signed) permutation matrix on inputs
    /// paired with one on outputs. Signs must be ±1; omitted signs default
    /// to +1 and an omitted output permutation means a trivial output action.
    pub fn permutation_pair(
        input_perm: Vec<usize>,
        input_signs: Option<Vec<f64>>,
        output_perm: Option<Vec<usize>>,
        output_signs: Option<Vec<f64>>,
    ) -> Result<Self> {
        let input = signed_permutation(input_perm, input_signs, "input")?;
        let output = match output_perm {
            Some(p) => signed_permutation(p, output_signs, "output")?,
            None => {
                if output_signs.is_some() {
                    return Err(Error::InvalidConfig(
                        "output_signs given without output_perm".into(),
                    ));
                }
                Transform::Identity
            }
        };

        let mut elements = vec![Element {
            name: "e".into(),
            input: Transform::Identity,
            output: Transform::Identity,
        }];
        let mut cur_in = input.clone();
        let mut cur_out = output.clone();
        let mut k = 1usize;
        loop {
            if cur_in.same_structure(&Transform::Identity)
                && cur_out.same_structure(&Transform::Identity)
            {
                break;
            }
            let name = if k == 1 { "g".to_string() } else { format!("g{k}") };
            elements.push(Element { name, input: cur_in.clone(), output: cur_out.clone() });
            cur_in = compose_transforms(&input, &cur_in).expect("signed permutations compose");
            cur_out = compose_transforms(&output, &cur_out).expect("signed permutations compose");
            k += 1;
            if k > 1024 {
                return Err(Error::InvalidConfig(
                    "permutation generator order exceeds 1024".into(),
                ));
            }
        }
        let default_support = (1..elements.len()).collect();
        let echo = serde_json::json!({
            "kind": "permutation-pair",
            "order": elements.len(),
        });
        Ok(Self {
            kind: "permutation-pair".into(),
            elements,
            default_support,
            law: CompositionLaw::Cyclic,
            echo,
        })
    }

    /// Registers an arbitrary finite action. `elements[0]` is treated as the
    /// identity; the caller is responsible for the output maps being linear.
    pub fn from_elements(kind: &str, elements: Vec<Element>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidConfig("an action needs at least the identity".into()));
        }
        let default_support = if elements.len() > 1 {
            (1..elements.len()).collect()
        } else {
            vec![0]
        };
        let echo = serde_json::json!({ "kind": "user-registered", "name": kind });
        Ok(Self {
            kind: kind.into(),
            elements,
            default_support,
            law: CompositionLaw::Unavailable,
            echo,
        })
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn identity_id(&self) -> usize {
        0
    }

    pub fn element_name(&self, id: usize) -> &str {
        &self.elements[id].name
    }

    pub fn element_id(&self, name: &str) -> Result<usize> {
        self.elements
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown group element {name:?}")))
    }

    /// Elements making up the default sampling support: the non-identity
    /// powers of each declared generator.
    pub fn default_support(&self) -> &[usize] {
        &self.default_support
    }

    /// `g · x`.
    pub fn apply_input(&self, g: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.element(g)?.input.apply(x)
    }

    /// `g ⋆ y`.
    pub fn apply_output(&self, g: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.element(g)?.output.apply(y)
    }

    fn element(&self, g: usize) -> Result<&Element> {
        self.elements
            .get(g)
            .ok_or_else(|| Error::InvalidInput(format!("element id {g} out of range")))
    }

    /// `g ∘ h` (apply `h` first) for built-in actions; `None` for
    /// user-registered closures.
    pub fn compose(&self, g: usize, h: usize) -> Option<usize> {
        if g >= self.elements.len() || h >= self.elements.len() {
            return None;
        }
        match self.law {
            CompositionLaw::Cyclic => Some((g + h) % self.elements.len()),
            CompositionLaw::Structural => {
                let (eg, eh) = (&self.elements[g], &self.elements[h]);
                let input = compose_transforms(&eg.input, &eh.input)?;
                let output = compose_transforms(&eg.output, &eh.output)?;
                self.elements.iter().position(|e| {
                    e.input.same_structure(&input) && e.output.same_structure(&output)
                })
            }
            CompositionLaw::Unavailable => None,
        }
    }

    /// Declarative description echoed into reports.
    pub fn echo(&self) -> &serde_json::Value {
        &self.echo
    }
}

fn signed_permutation(perm: Vec<usize>, signs: Option<Vec<f64>>, side: &str) -> Result<Transform> {
    let n = perm.len();
    if n == 0 {
        return Err(Error::InvalidConfig(format!("{side} permutation is empty")));
    }
    let mut seen = vec![false; n];
    for &p in &perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidConfig(format!(
                "{side} permutation is not a bijection on 0..{n}"
            )));
        }
        seen[p] = true;
    }
    let signs = signs.unwrap_or_else(|| vec![1.0; n]);
    if signs.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{side} signs have length {}, permutation has {n}",
            signs.len()
        )));
    }
    if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::InvalidConfig(format!("{side} signs must be ±1")));
    }
    Ok(Transform::SignedPermutation { perm, signs })
}

/// Declarative description of a built-in action, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionSpec {
    AxisRotation {
        dimension: usize,
    },
    AxisRotationSignFlip {
        dimension: usize,
    },
    ImageD4 {
        side: usize,
        #[serde(default)]
        equivariant_output: bool,
    },
    PermutationPair {
        input_perm: Vec<usize>,
        #[serde(default)]
        input_signs: Option<Vec<f64>>,
        #[serde(default)]
        output_perm: Option<Vec<usize>>,
        #[serde(default)]
        output_signs: Option<Vec<f64>>,
    },
}

impl ActionSpec {
    pub fn build(&self) -> Result<GroupAction> {
        match self {
            ActionSpec::AxisRotation { dimension } => GroupAction::axis_rotation(*dimension),
            ActionSpec::AxisRotationSignFlip { dimension } => {
                GroupAction::axis_rotation_sign_flip(*dimension)
            }
            ActionSpec::ImageD4 { side, equivariant_output } => {
                GroupAction::image_d4(*side, *equivariant_output)
            }
            ActionSpec::PermutationPair { input_perm, input_signs, output_perm, output_signs } => {
                GroupAction::permutation_pair(
                    input_perm.clone(),
                    input_signs.clone(),
                    output_perm.clone(),
                    output_signs.clone(),
                )
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("action spec: {e}")))
    }

    pub fn from_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("action spec serializes")
    }
}

/// A sampling distribution over the elements of an action.
#[derive(Debug, Clone)]
pub struct GeneratorDistribution {
    support: Vec<usize>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GeneratorDistribution {
    /// Uniform over the action's default support (non-identity generator
    /// powers).
    pub fn uniform_non_identity(action: &GroupAction) -> Result<Self> {
        let support = action.default_support().to_vec();
        let w = 1.0 / support.len() as f64;
        Self::from_support(action, support, vec![w; action.default_support().len()])
    }

    pub fn point_mass(action: &GroupAction, name: &str) -> Result<Self> {
        let id = action.element_id(name)?;
        Self::from_support(action, vec![id], vec![1.0])
    }

    pub fn uniform_over(action: &GroupAction, names: &[&str]) -> Result<Self> {
        let support: Vec<usize> =
            names.iter().map(|n| action.element_id(n)).collect::<Result<_>>()?;
        let w = 1.0 / support.len().max(1) as f64;
        let weights = vec![w; support.len()];
        Self::from_support(action, support, weights)
    }

    pub fn from_weights(action: &GroupAction, items: &[(&str, f64)]) -> Result<Self> {
        let mut support = Vec::with_capacity(items.len());
        let mut weights = Vec::with_capacity(items.len());
        for (name, w) in items {
            support.push(action.element_id(name)?);
            weights.push(*w);
        }
        Self::from_support(action, support, weights)
    }

    fn from_support(action: &GroupAction, support: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidConfig("generator distribution has empty support".into()));
        }
        if support.iter().any(|&id| id >= action.len()) {
            return Err(Error::InvalidConfig("support references unknown elements".into()));
        }
        if weights.len() != support.len() {
            return Err(Error::InvalidConfig("weights and support differ in length".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self { support, weights, cumulative })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Draws an element id.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        for (k, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return self.support[k];
            }
        }
        *self.support.last().expect("support nonempty")
    }

    /// Names and weights for report echoes.
    pub fn echo(&self, action: &GroupAction) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .support
            .iter()
            .zip(&self.weights)
            .map(|(&id, &w)| serde_json::json!({ "element": action.element_name(id), "weight": w }))
            .collect();
        serde_json::Value::Array(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn quarter_turn_matches_definition() {
        let act = GroupAction::axis_rotation(4).unwrap();
        let r = act.element_id("R").unwrap();
        let out = act.apply_input(r, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![-2.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn sign_flip_variant_matches_definition() {
        let act = GroupAction::axis_rotation_sign_flip(4).unwrap();
        let r = act.element_id("R").unwrap();
        let out = act.apply_input(r, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![-1.0, -2.0, 3.0, 4.0]);
    }

    #[test]
    fn identity_acts_trivially() {
        let act = GroupAction::axis_rotation(2).unwrap();
        let x = vec![0.3, -0.7];
        assert_eq!(act.apply_input(act.identity_id(), &x).unwrap(), x);
        let y = vec![1.25];
        assert_eq!(act.apply_output(act.identity_id(), &y).unwrap(), y);
    }

    #[test]
    fn rotation_has_order_four() {
        for act in [
            GroupAction::axis_rotation(3).unwrap(),
            GroupAction::axis_rotation_sign_flip(3).unwrap(),
        ] {
            let r = act.element_id("R").unwrap();
            let x = vec![0.5, -1.5, 2.5];
            let mut cur = x.clone();
            for _ in 0..4 {
                cur = act.apply_input(r, &cur).unwrap();
            }
            assert_eq!(cur, x);
        }
    }

    #[test]
    fn sign_flip_square_acts_as_identity_map() {
        let act = GroupAction::axis_rotation_sign_flip(2).unwrap();
        let r2 = act.element_id("R2").unwrap();
        let x = vec![0.4, 0.9];
        assert_eq!(act.apply_input(r2, &x).unwrap(), x);
    }

    #[test]
    fn rotation_too_small_dimension_errors() {
        let act = GroupAction::axis_rotation(2).unwrap();
        let r = act.element_id("R").unwrap();
        assert!(act.apply_input(r, &[1.0]).is_err());
        assert!(GroupAction::axis_rotation(1).is_err());
    }

    #[test]
    fn unknown_element_errors() {
        let act = GroupAction::axis_rotation(2).unwrap();
        assert!(act.element_id("Q").is_err());
        assert!(act.apply_input(99, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn flip_reverses_columns() {
        let act = GroupAction::image_d4(2, false).unwrap();
        let b = act.element_id("b").unwrap();
        let out = act.apply_input(b, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn d4_relations_hold_pixel_exact() {
        let act = GroupAction::image_d4(5, false).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let img: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = act.element_id("a").unwrap();
        let b = act.element_id("b").unwrap();

        let mut x = img.clone();
        for _ in 0..4 {
            x = act.apply_input(a, &x).unwrap();
        }
        assert_eq!(x, img, "a⁴ = e");

        let bb = act.apply_input(b, &act.apply_input(b, &img).unwrap()).unwrap();
        assert_eq!(bb, img, "b² = e");

        // ab = ba⁻¹, applied to pixels.
        let ab = act.apply_input(a, &act.apply_input(b, &img).unwrap()).unwrap();
        let mut ba3 = img.clone();
        for _ in 0..3 {
            ba3 = act.apply_input(a, &ba3).unwrap();
        }
        ba3 = act.apply_input(b, &ba3).unwrap();
        assert_eq!(ab, ba3, "ab = ba⁻¹");
    }

    #[test]
    fn d4_composition_table_matches_sequential_application() {
        let act = GroupAction::image_d4(4, true).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let img: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        for g in 0..act.len() {
            for h in 0..act.len() {
                let gh = act.compose(g, h).expect("built-ins compose");
                let seq = act.apply_input(g, &act.apply_input(h, &img).unwrap()).unwrap();
                let direct = act.apply_input(gh, &img).unwrap();
                assert_eq!(seq, direct, "g={} h={}", act.element_name(g), act.element_name(h));
            }
        }
    }

    #[test]
    fn equivariant_output_round_trips_mask() {
        let act = GroupAction::image_d4(3, true).unwrap();
        let b = act.element_id("b").unwrap();
        let mask: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let once = act.apply_output(b, &mask).unwrap();
        let twice = act.apply_output(b, &once).unwrap();
        assert_eq!(twice, mask);
    }

    #[test]
    fn output_actions_are_linear() {
        let pair = GroupAction::permutation_pair(
            vec![1, 2, 0],
            None,
            Some(vec![1, 0]),
            Some(vec![-1.0, 1.0]),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..200 {
            let g = rng.random_range(0..pair.len());
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let z: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let alpha: f64 = rng.random_range(-3.0..3.0);
            let lhs: Vec<f64> = {
                let combo: Vec<f64> =
                    y.iter().zip(&z).map(|(u, v)| alpha * u + v).collect();
                pair.apply_output(g, &combo).unwrap()
            };
            let gy = pair.apply_output(g, &y).unwrap();
            let gz = pair.apply_output(g, &z).unwrap();
            for i in 0..2 {
                assert!((lhs[i] - (alpha * gy[i] + gz[i])).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn permutation_pair_enumerates_powers() {
        let act = GroupAction::permutation_pair(vec![1, 2, 0], None, None, None).unwrap();
        // A 3-cycle has order 3: e, g, g2.
        assert_eq!(act.len(), 3);
        assert_eq!(act.default_support(), &[1, 2]);
        let g = act.element_id("g").unwrap();
        let out = act.apply_input(g, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn permutation_pair_validation() {
        assert!(GroupAction::permutation_pair(vec![0, 0], None, None, None).is_err());
        assert!(GroupAction::permutation_pair(vec![1, 0], Some(vec![2.0, 1.0]), None, None)
            .is_err());
        assert!(GroupAction::permutation_pair(vec![1, 0], Some(vec![1.0]), None, None).is_err());
    }

    #[test]
    fn action_spec_json_round_trip() {
        let spec = ActionSpec::from_json(r#"{ "kind": "axis-rotation", "dimension": 2 }"#).unwrap();
        assert_eq!(spec, ActionSpec::AxisRotation { dimension: 2 });
        let act = spec.build().unwrap();
        assert_eq!(act.len(), 4);

        let spec = ActionSpec::from_json(r#"{ "kind": "image-d4", "side": 28 }"#).unwrap();
        let act = spec.build().unwrap();
        assert_eq!(act.len(), 8);

        let text = serde_json::to_string(&ActionSpec::PermutationPair {
            input_perm: vec![1, 0],
            input_signs: None,
            output_perm: None,
            output_signs: None,
        })
        .unwrap();
        let back = ActionSpec::from_json(&text).unwrap();
        assert!(matches!(back, ActionSpec::PermutationPair { .. }));
    }

    #[test]
    fn action_spec_rejects_unknown_kind() {
        assert!(ActionSpec::from_json(r#"{ "kind": "moebius" }"#).is_err());
    }

    #[test]
    fn distribution_validation() {
        let act = GroupAction::axis_rotation(2).unwrap();
        assert!(GeneratorDistribution::from_weights(&act, &[("R", 0.6), ("R2", 0.3)]).is_err());
        assert!(GeneratorDistribution::from_weights(&act, &[("R", 1.2), ("R2", -0.2)]).is_err());
        let d = GeneratorDistribution::uniform_non_identity(&act).unwrap();
        assert_eq!(d.support().len(), 3);
    }

    #[test]
    fn point_mass_always_returns_its_element() {
        let act = GroupAction::image_d4(4, false).unwrap();
        let d = GeneratorDistribution::point_mass(&act, "b").unwrap();
        let b = act.element_id("b").unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), b);
        }
    }
}
