//! Scene files: JSON documents naming coframings, surfaces, gauges, model
//! morphisms and curves, plus one task block per subcommand.

use std::collections::BTreeMap;
use std::fmt;

use cartan_core::algebra::{builtin_model, builtin_morphism, Mat, ModelMorphism};
use cartan_core::cartan::{builtin_gauge, disguise, lift, riemannian_gauge, CartanGauge};
use cartan_core::coframing::{builtin_coframing, Chart, Coframing};
use cartan_core::development::SourceCurve;
use cartan_core::expr::{parse_in, Expr};
use cartan_core::ode::Trajectory;
use cartan_core::rolling::{builtin_surface, frame_bundle_se2, SurfaceMetric};
use cartan_core::Error;
use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Number, Value};

/// Why a run stopped; each kind has its own exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Invalid(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 64,
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Invalid(m) => write!(f, "invalid: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

pub type Res<T> = std::result::Result<T, Failure>;

pub fn invalid(path: &str, msg: impl fmt::Display) -> Failure {
    Failure::Invalid(format!("{path}: {msg}"))
}

/// Library errors are input problems unless they come from the numerics.
pub fn core(path: &str, e: Error) -> Failure {
    let numerical = matches!(
        e,
        Error::Overflow | Error::IntegrationEscaped | Error::IllDefined(_) | Error::ObstructionTooLarge(_) | Error::Domain(_) | Error::SingularCoframe(_)
    );
    let msg = format!("{path}: {e}");
    if numerical {
        Failure::Numerical(msg)
    } else {
        Failure::Invalid(msg)
    }
}

/// JSON value that refuses duplicate object keys.
struct Strict(Value);

impl<'de> Deserialize<'de> for Strict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(StrictVisitor).map(Strict)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }
    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }
    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::Number(v.into()))
    }
    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::Number(v.into()))
    }
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Value, E> {
        Number::from_f64(v).map(Value::Number).ok_or_else(|| E::custom("non-finite number"))
    }
    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_string()))
    }
    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }
    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }
    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut out = Vec::new();
        while let Some(Strict(v)) = seq.next_element()? {
            out.push(v);
        }
        Ok(Value::Array(out))
    }
    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut out = Map::new();
        while let Some(k) = map.next_key::<String>()? {
            let Strict(v) = map.next_value()?;
            if out.insert(k.clone(), v).is_some() {
                return Err(de::Error::custom(format!("duplicate name `{k}`")));
            }
        }
        Ok(Value::Object(out))
    }
}

fn key_path(path: &str, key: &str) -> String {
    if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        format!("{path}.{key}")
    } else {
        format!("{path}[{key:?}]")
    }
}

/// A value together with its JSON path, for diagnostics.
#[derive(Clone)]
pub struct Node<'a> {
    pub v: &'a Value,
    pub path: String,
}

impl<'a> Node<'a> {
    pub fn root(v: &'a Value) -> Node<'a> {
        Node { v, path: "$".into() }
    }

    pub fn opt(&self, key: &str) -> Option<Node<'a>> {
        self.v.get(key).filter(|v| !v.is_null()).map(|v| Node { v, path: key_path(&self.path, key) })
    }

    pub fn get(&self, key: &str) -> Res<Node<'a>> {
        if !self.v.is_object() {
            return Err(invalid(&self.path, "expected an object"));
        }
        self.opt(key).ok_or_else(|| invalid(&key_path(&self.path, key), "missing"))
    }

    pub fn has(&self, key: &str) -> bool {
        self.opt(key).is_some()
    }

    pub fn items(&self) -> Res<Vec<Node<'a>>> {
        match self.v {
            Value::Array(a) => Ok(a.iter().enumerate().map(|(i, v)| Node { v, path: format!("{}[{i}]", self.path) }).collect()),
            _ => Err(invalid(&self.path, "expected an array")),
        }
    }

    pub fn entries(&self) -> Res<Vec<(&'a str, Node<'a>)>> {
        match self.v {
            Value::Object(m) => Ok(m.iter().map(|(k, v)| (k.as_str(), Node { v, path: key_path(&self.path, k) })).collect()),
            _ => Err(invalid(&self.path, "expected an object")),
        }
    }

    pub fn str(&self) -> Res<&'a str> {
        self.v.as_str().ok_or_else(|| invalid(&self.path, "expected a string"))
    }

    pub fn f64(&self) -> Res<f64> {
        match self.v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(invalid(&self.path, "expected a finite number")),
        }
    }

    /// A number, or one of the strings `inf`, `-inf`.
    pub fn extended(&self) -> Res<f64> {
        match self.v.as_str() {
            Some("inf") => Ok(f64::INFINITY),
            Some("-inf") => Ok(f64::NEG_INFINITY),
            _ => self.f64(),
        }
    }

    pub fn usize(&self) -> Res<usize> {
        self.v.as_u64().map(|n| n as usize).ok_or_else(|| invalid(&self.path, "expected a nonnegative integer"))
    }

    pub fn bool(&self) -> Res<bool> {
        self.v.as_bool().ok_or_else(|| invalid(&self.path, "expected true or false"))
    }

    pub fn vec(&self) -> Res<Vec<f64>> {
        self.items()?.iter().map(Node::f64).collect()
    }

    pub fn vec_len(&self, n: usize) -> Res<Vec<f64>> {
        let v = self.vec()?;
        if v.len() != n {
            return Err(invalid(&self.path, format!("expected {n} entries, got {}", v.len())));
        }
        Ok(v)
    }

    /// Matrix given as a list of rows.
    pub fn mat(&self) -> Res<Mat> {
        let rows = self.items()?.iter().map(Node::vec).collect::<Res<Vec<_>>>()?;
        let c = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(invalid(&self.path, "expected a nonempty rectangular list of rows"));
        }
        Ok(Mat::from_row_iterator(rows.len(), c, rows.into_iter().flatten()))
    }

    pub fn span(&self) -> Res<(f64, f64)> {
        let v = self.vec_len(2)?;
        if !(v[1] > v[0]) {
            return Err(invalid(&self.path, "expected [t0, t1] with t1 > t0"));
        }
        Ok((v[0], v[1]))
    }

    pub fn expr(&self, nvars: usize) -> Res<Expr> {
        parse_in(self.str()?, nvars).map_err(|e| core(&self.path, e))
    }

    pub fn exprs(&self, nvars: usize) -> Res<Vec<Expr>> {
        self.items()?.iter().map(|n| n.expr(nvars)).collect()
    }

    pub fn core<T>(&self, r: cartan_core::Result<T>) -> Res<T> {
        r.map_err(|e| core(&self.path, e))
    }
}

const SECTIONS: [&str; 5] = ["coframings", "surfaces", "gauges", "morphisms", "curves"];
pub const TASKS: [&str; 8] = ["flow", "develop", "probe", "torsion", "hit", "curvature", "jacobi", "roll"];
const MAX_DEPTH: usize = 16;

pub struct Scene {
    root: Value,
    /// Which section defines each name.
    owner: BTreeMap<String, &'static str>,
    pub tol: Option<f64>,
}

impl Scene {
    pub fn load(path: &str) -> Res<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{path}: {e}")))?;
        Scene::parse(&text).map_err(|f| match f {
            Failure::Invalid(m) => Failure::Invalid(format!("{path}: {m}")),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Res<Scene> {
        let mut d = serde_json::Deserializer::from_str(text);
        let Strict(root) = Strict::deserialize(&mut d).map_err(|e| Failure::Invalid(format!("$: {e}")))?;
        d.end().map_err(|e| Failure::Invalid(format!("$: {e}")))?;
        let top = Node::root(&root);
        let mut owner = BTreeMap::new();
        for (k, _) in top.entries()? {
            if !SECTIONS.contains(&k) && !TASKS.contains(&k) && k != "defaults" && k != "description" {
                return Err(invalid(&key_path("$", k), "unknown section"));
            }
        }
        for sec in SECTIONS {
            if let Some(n) = top.opt(sec) {
                for (name, _) in n.entries()? {
                    if let Some(prev) = owner.insert(name.to_string(), sec) {
                        return Err(invalid(&key_path(&n.path, name), format!("name already used in `{prev}`")));
                    }
                }
            }
        }
        let tol = match top.opt("defaults") {
            Some(d) => match d.opt("tol") {
                Some(t) => Some(positive(&t)?),
                None => None,
            },
            None => None,
        };
        Ok(Scene { root, owner, tol })
    }

    pub fn top(&self) -> Node<'_> {
        Node::root(&self.root)
    }

    pub fn task(&self, name: &str) -> Res<Node<'_>> {
        self.top().opt(name).ok_or_else(|| Failure::Invalid(format!("{}: scene has no `{name}` block", key_path("$", name))))
    }

    pub fn default_number(&self, key: &str) -> Res<Option<f64>> {
        match self.top().opt("defaults").and_then(|d| d.opt(key)) {
            Some(n) => Ok(Some(n.f64()?)),
            None => Ok(None),
        }
    }

    fn definition(&self, section: &str, name: &str) -> Option<Node<'_>> {
        self.top().opt(section).and_then(|s| s.opt(name))
    }

    fn depth_guard(depth: usize, at: &Node) -> Res<()> {
        if depth > MAX_DEPTH {
            return Err(invalid(&at.path, "reference cycle"));
        }
        Ok(())
    }

    fn reference<'a>(&self, at: &Node<'a>) -> Res<&'a str> {
        at.str()
    }

    pub fn coframing(&self, at: &Node) -> Res<Coframing> {
        let name = self.reference(at)?;
        match self.definition("coframings", name) {
            Some(def) => self.build_coframing(name, &def),
            None if self.owner.contains_key(name) => Err(invalid(&at.path, format!("`{name}` is not a coframing"))),
            None => builtin_coframing(name).map_err(|_| invalid(&at.path, format!("unknown coframing `{name}`"))),
        }
    }

    fn build_coframing(&self, name: &str, def: &Node) -> Res<Coframing> {
        if let Some(b) = def.opt("builtin") {
            return b.core(builtin_coframing(b.str()?));
        }
        if let Some(s) = def.opt("frame_bundle") {
            let surf = self.surface(&s)?;
            return s.core(frame_bundle_se2(&surf));
        }
        let chart = chart(&def.get("chart")?)?;
        let n = chart.dim();
        let om = def.get("omega")?;
        let rows = om.items()?.iter().map(|r| r.exprs(n)).collect::<Res<Vec<_>>>()?;
        let inner = match def.opt("inner") {
            Some(m) => Some(m.mat()?),
            None => None,
        };
        def.core(Coframing::new(name, chart, rows, inner))
    }

    pub fn surface(&self, at: &Node) -> Res<SurfaceMetric> {
        let name = self.reference(at)?;
        match self.definition("surfaces", name) {
            Some(def) => {
                if let Some(b) = def.opt("builtin") {
                    return b.core(builtin_surface(b.str()?));
                }
                let c = chart(&def.get("chart")?)?;
                if c.dim() != 2 {
                    return Err(invalid(&def.path, "surfaces have two coordinates"));
                }
                let (e, f, g) = (def.get("E")?.expr(2)?, def.get("F")?.expr(2)?, def.get("G")?.expr(2)?);
                def.core(SurfaceMetric::new(name, c, e, f, g))
            }
            None if self.owner.contains_key(name) => Err(invalid(&at.path, format!("`{name}` is not a surface"))),
            None => builtin_surface(name).map_err(|_| invalid(&at.path, format!("unknown surface `{name}`"))),
        }
    }

    pub fn gauge(&self, at: &Node) -> Res<CartanGauge> {
        self.gauge_at(at, 0)
    }

    fn gauge_at(&self, at: &Node, depth: usize) -> Res<CartanGauge> {
        Self::depth_guard(depth, at)?;
        let name = self.reference(at)?;
        let Some(def) = self.definition("gauges", name) else {
            if self.owner.contains_key(name) {
                return Err(invalid(&at.path, format!("`{name}` is not a gauge")));
            }
            return builtin_gauge(name).map_err(|e| invalid(&at.path, format!("unknown gauge `{name}` ({e})")));
        };
        if let Some(b) = def.opt("builtin") {
            return b.core(builtin_gauge(b.str()?));
        }
        if let Some(s) = def.opt("surface") {
            let surf = self.surface(&s)?;
            let euclid = s.core(riemannian_gauge(&surf))?;
            let geometry = match def.opt("geometry") {
                Some(g) => g.str()?,
                None => "euclid",
            };
            let steps: &[&str] = match geometry {
                "euclid" => &[],
                "affine" => &["euclid-to-affine(2)"],
                "projective" => &["euclid-to-affine(2)", "affine-to-projective(2)"],
                _ => return Err(invalid(&key_path(&def.path, "geometry"), "expected euclid, affine or projective")),
            };
            let mut g = euclid;
            for m in steps {
                g = def.core(disguise(&g, &builtin_morphism(m).map_err(|e| core(&def.path, e))?))?;
            }
            return Ok(g);
        }
        if let Some(src) = def.opt("disguise") {
            let g0 = self.gauge_at(&src, depth + 1)?;
            let phi = self.morphism_at(&def.get("morphism")?, depth + 1)?;
            return def.core(disguise(&g0, &phi));
        }
        if let Some(src) = def.opt("lift") {
            let g0 = self.gauge_at(&src, depth + 1)?;
            let k = def.get("k")?;
            return k.core(lift(&g0, k.usize()?));
        }
        let m = def.get("model")?;
        let model = m.core(builtin_model(m.str()?))?;
        let c = chart(&def.get("chart")?)?;
        let n = c.dim();
        let rows = def.get("gamma")?.items()?.iter().map(|r| r.exprs(n)).collect::<Res<Vec<_>>>()?;
        def.core(CartanGauge::new(name, model, c, rows))
    }

    pub fn morphism(&self, at: &Node) -> Res<ModelMorphism> {
        self.morphism_at(at, 0)
    }

    fn morphism_at(&self, at: &Node, depth: usize) -> Res<ModelMorphism> {
        Self::depth_guard(depth, at)?;
        let name = self.reference(at)?;
        let Some(def) = self.definition("morphisms", name) else {
            if self.owner.contains_key(name) {
                return Err(invalid(&at.path, format!("`{name}` is not a morphism")));
            }
            return builtin_morphism(name).map_err(|e| invalid(&at.path, format!("unknown morphism `{name}` ({e})")));
        };
        if let Some(b) = def.opt("builtin") {
            return b.core(builtin_morphism(b.str()?));
        }
        let parts = def.get("compose")?.items()?;
        let mut it = parts.iter();
        let first = it.next().ok_or_else(|| invalid(&key_path(&def.path, "compose"), "empty composition"))?;
        let mut m = self.morphism_at(first, depth + 1)?;
        for p in it {
            let next = self.morphism_at(p, depth + 1)?;
            m = p.core(m.then(&next))?;
        }
        Ok(m)
    }

    pub fn curve(&self, at: &Node) -> Res<SourceCurve> {
        let name = self.reference(at)?;
        let def = self.definition("curves", name).ok_or_else(|| invalid(&at.path, format!("unknown curve `{name}`")))?;
        if let Some(e) = def.opt("exprs") {
            let ex = e.exprs(0)?;
            if ex.is_empty() {
                return Err(invalid(&e.path, "a curve needs at least one component"));
            }
            return Ok(SourceCurve::Exprs(ex));
        }
        let t = def.get("t")?.vec()?;
        let x = def.get("x")?.items()?.iter().map(Node::vec).collect::<Res<Vec<_>>>()?;
        Ok(SourceCurve::Sampled(def.core(Trajectory::from_samples(t, x))?))
    }

    /// Build every named object.
    pub fn check_objects(&self) -> Res<()> {
        for (name, sec) in &self.owner {
            let node = Node { v: &Value::Null, path: key_path(&key_path("$", sec), name) };
            let v = Value::String(name.clone());
            let at = Node { v: &v, path: node.path };
            match *sec {
                "coframings" => self.coframing(&at).map(drop)?,
                "surfaces" => self.surface(&at).map(drop)?,
                "gauges" => self.gauge(&at).map(drop)?,
                "morphisms" => self.morphism(&at).map(drop)?,
                _ => self.curve(&at).map(drop)?,
            }
        }
        Ok(())
    }
}

pub fn positive(n: &Node) -> Res<f64> {
    let v = n.f64()?;
    if !(v > 0.0) {
        return Err(invalid(&n.path, "expected a positive number"));
    }
    Ok(v)
}

/// `{"lo": [...], "hi": [...], "inside": "expr"}` or `{"unbounded": n}`.
pub fn chart(n: &Node) -> Res<Chart> {
    if let Some(d) = n.opt("unbounded") {
        let d = d.usize()?;
        if d == 0 {
            return Err(invalid(&n.path, "dimension must be positive"));
        }
        return Ok(Chart::unbounded(d));
    }
    let lo = n.get("lo")?.items()?.iter().map(Node::extended).collect::<Res<Vec<_>>>()?;
    let hi = n.get("hi")?.items()?.iter().map(Node::extended).collect::<Res<Vec<_>>>()?;
    let inside = match n.opt("inside") {
        Some(p) => Some(p.expr(lo.len())?),
        None => None,
    };
    n.core(Chart::new(lo, hi, inside))
}
