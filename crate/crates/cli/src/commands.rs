//! One function per subcommand. Each parses and resolves its task block
//! first; with `dry` set it stops there, which is what `validate` runs.

use cartan_core::algebra::{geodesic_inclusion, Mat, ModelMorphism};
use cartan_core::cartan::{bundle_flow, curvature_tower, develop_bundle_curve, disguise_residual, phi_obstruction, BundleTrajectory, CartanGauge, Frames};
use cartan_core::coframing::{bracket_tower, flow, halton, torsion_tower, Coframing, Driver};
use cartan_core::development::{completeness_probe, develop, development_residual, DevelopmentProblem, ProbeBudget, ProbeVerdict};
use cartan_core::expr::Expr;
use cartan_core::lens::survey;
use cartan_core::morphism::{hits_to_order, integrate_morphism_grid};
use cartan_core::ode::{OdeOptions, Status, Trajectory};
use cartan_core::rolling::{characteristic_curve, geodesic_residual, growth_ranks, rolling_space, tangency_residual, GeodesicStart};
use cartan_core::variation::{conjugate_point, geodesic_model_gauge, integrate_first_variation, projective_jacobi, projective_rotation, MorphismCurve};
use serde_json::{json, Map, Value};

use crate::output::{trajectory_table, Cell, Report, Table};
use crate::scene::{invalid, positive, Failure, Node, Res, Scene};

#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub tol: f64,
    pub seed: usize,
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("values serialize")
}

fn mat_json(m: &Mat) -> Value {
    Value::Array((0..m.nrows()).map(|i| to_json(&m.row(i).iter().copied().collect::<Vec<f64>>())).collect())
}

/// Rows (key, value) for every scalar leaf, keyed by JSON path.
pub fn flatten(v: &Value) -> Table {
    fn walk(v: &Value, path: String, out: &mut Vec<Vec<Cell>>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    walk(x, format!("{path}.{k}"), out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(x, format!("{path}[{i}]"), out);
                }
            }
            Value::Number(n) => {
                let cell = match n.as_i64() {
                    Some(i) if !n.is_f64() => Cell::Int(i),
                    _ => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
                };
                out.push(vec![Cell::Text(path), cell]);
            }
            Value::Bool(b) => out.push(vec![Cell::Text(path), Cell::Bool(*b)]),
            Value::String(s) => out.push(vec![Cell::Text(path), Cell::Text(s.clone())]),
            Value::Null => out.push(vec![Cell::Text(path), Cell::Text(String::new())]),
        }
    }
    let mut t = Table::new(&["key", "value"]);
    walk(v, "$".into(), &mut t.rows);
    t
}

fn keyed(json: Value) -> Report {
    Report { table: flatten(&json), json, failure: None }
}

fn require(n: &Node) -> Res<bool> {
    n.opt("require_complete").map_or(Ok(false), |b| b.bool())
}

fn incomplete(path: &str, status: &Status) -> Failure {
    Failure::Numerical(format!("{path}: integration stopped early ({} at t = {})", status.label(), status.time().unwrap_or(f64::NAN)))
}

fn trajectory_report(n: &Node, tr: &Trajectory, frames: Option<&[Mat]>, extra: Map<String, Value>) -> Res<Report> {
    let mut json = to_json(tr);
    if let Value::Object(m) = &mut json {
        if let Some(f) = frames {
            m.insert("frames".into(), Value::Array(f.iter().map(mat_json).collect()));
        }
        m.extend(extra);
    }
    let failure = if require(n)? && !tr.status.is_completed() { Some(incomplete(&n.path, &tr.status)) } else { None };
    Ok(Report { json, table: trajectory_table(tr), failure })
}

/// Numbers give a constant driver; any string makes every entry an
/// expression in `t`.
fn driver(n: &Node, dim: usize) -> Res<Driver> {
    let items = n.items()?;
    if items.len() != dim {
        return Err(invalid(&n.path, format!("expected {dim} entries, got {}", items.len())));
    }
    if items.iter().all(|i| i.v.is_number()) {
        return Ok(Driver::Constant(n.vec()?));
    }
    let ex = items.iter().map(|i| if i.v.is_number() { Ok(Expr::num(i.f64()?)) } else { i.expr(0) }).collect::<Res<Vec<_>>>()?;
    Ok(Driver::Exprs(ex))
}

fn square(n: &Node, size: usize) -> Res<Mat> {
    let m = n.mat()?;
    if m.nrows() != size || m.ncols() != size {
        return Err(invalid(&n.path, format!("expected a {size}x{size} matrix")));
    }
    Ok(m)
}

fn frame_or_identity(n: &Node, key: &str, size: usize) -> Res<Mat> {
    n.opt(key).map_or(Ok(Mat::identity(size, size)), |m| square(&m, size))
}

fn depth(n: &Node, key: &str, max: usize) -> Res<usize> {
    let Some(d) = n.opt(key) else { return Ok(0) };
    let v = d.usize()?;
    if v > max {
        return Err(invalid(&d.path, format!("at most {max}")));
    }
    Ok(v)
}

pub fn flow_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("flow")?;
    let span = n.get("t_span")?.span()?;
    require(&n)?;
    if let Some(c) = n.opt("coframing") {
        let cof = scene.coframing(&c)?;
        let start = n.get("start")?.vec_len(cof.dim())?;
        let d = driver(&n.get("driver")?, cof.dim())?;
        if dry {
            return Ok(None);
        }
        let tr = n.core(flow(&cof, &d, &start, span.0, span.1, OdeOptions::new(ctx.tol)))?;
        return trajectory_report(&n, &tr, None, Map::new()).map(Some);
    }
    let g = scene.gauge(&n.get("gauge")?)?;
    let start = n.get("start")?.vec_len(g.chart_dim())?;
    let h = frame_or_identity(&n, "frame", g.model.g.size)?;
    let d = driver(&n.get("driver")?, g.model.dim())?;
    if dry {
        return Ok(None);
    }
    let f = d.compile();
    let tr = n.core(bundle_flow(&g, f, &start, &h, span, ctx.tol))?;
    trajectory_report(&n, &tr.base, Some(&tr.frames), Map::new()).map(Some)
}

pub fn develop_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("develop")?;
    let span = n.get("t_span")?.span()?;
    let curve_node = n.get("curve")?;
    let curve = scene.curve(&curve_node)?;
    require(&n)?;
    if let Some(a) = n.opt("map") {
        let (src, tgt) = (scene.coframing(&n.get("source")?)?, scene.coframing(&n.get("target")?)?);
        let map = a.mat()?;
        let start = n.get("start")?.vec_len(tgt.dim())?;
        let immersed = n.opt("immersed").map_or(Ok(false), |b| b.bool())?;
        let p = DevelopmentProblem { source: &src, target: &tgt, a: map, curve, start, t_span: span, tol: ctx.tol, immersed };
        if dry {
            return Ok(None);
        }
        let tr = n.core(develop(&p))?;
        let resid = n.core(development_residual(&p, &tr))?;
        let mut extra = Map::new();
        extra.insert("residual".into(), json!(resid));
        return trajectory_report(&n, &tr, None, extra).map(Some);
    }
    let (g0, g1) = (scene.gauge(&n.get("source")?)?, scene.gauge(&n.get("target")?)?);
    let phi = match n.opt("morphism") {
        Some(m) => scene.morphism(&m)?,
        None => ModelMorphism::identity(&g0.model),
    };
    let frames = Frames {
        h0: frame_or_identity(&n, "h0", g0.model.g.size)?,
        x1: n.get("start")?.vec_len(g1.chart_dim())?,
        h1: frame_or_identity(&n, "h1", g1.model.g.size)?,
    };
    if curve.dim() != g0.chart_dim() {
        return Err(invalid(&curve_node.path, format!("curve must have {} components", g0.chart_dim())));
    }
    if dry {
        return Ok(None);
    }
    let tr: BundleTrajectory = n.core(develop_bundle_curve(&g0, &g1, &phi, &curve, &frames, span, ctx.tol))?;
    trajectory_report(&n, &tr.base, Some(&tr.frames), Map::new()).map(Some)
}

pub fn probe_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("probe")?;
    let cof = scene.coframing(&n.get("coframing")?)?;
    let count = |k: &str, d: usize| n.opt(k).map_or(Ok(d), |v| v.usize());
    let budget = ProbeBudget {
        n_directions: count("directions", 4)?,
        n_starts: count("starts", 2)?,
        t_max: match n.opt("t_max") {
            Some(t) => positive(&t)?,
            None => scene.default_number("t_max")?.unwrap_or(50.0),
        },
        tol: ctx.tol,
        seed: ctx.seed,
    };
    if budget.n_directions == 0 || budget.n_starts == 0 {
        return Err(invalid(&n.path, "directions and starts must be positive"));
    }
    if dry {
        return Ok(None);
    }
    let v = n.core(completeness_probe(&cof, &budget))?;
    let expect = n.opt("expect").map(|e| e.str().map(str::to_string)).transpose()?;
    let mut report = keyed(to_json(&v));
    let label = match v {
        ProbeVerdict::Escape(_) => "escape",
        ProbeVerdict::NoEscapeFound { .. } => "no-escape-found",
    };
    if let Some(e) = expect {
        if e != label {
            report.failure = Some(Failure::Numerical(format!("{}: expected {e}, found {label}", n.path)));
        }
    }
    Ok(Some(report))
}

pub fn torsion_cmd(scene: &Scene, _ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("torsion")?;
    let cof = scene.coframing(&n.get("coframing")?)?;
    let x = n.get("point")?.vec_len(cof.dim())?;
    let p = depth(&n, "depth", 3)?;
    let brackets = match n.opt("brackets") {
        Some(b) => Some(b.items()?.iter().map(|v| v.vec_len(cof.dim())).collect::<Res<Vec<_>>>()?),
        None => None,
    };
    if dry {
        return Ok(None);
    }
    let tower = n.core(torsion_tower(&cof, &x, p))?;
    let mut json = to_json(&tower);
    if let Some(vs) = brackets {
        let b = n.core(bracket_tower(&cof, &x, &vs))?;
        json["bracket"] = to_json(&b);
    }
    Ok(Some(keyed(json)))
}

pub fn hit_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("hit")?;
    let order = depth(&n, "order", 3)?;
    if let Some(m) = n.opt("morphism") {
        let (g0, g1) = (scene.gauge(&n.get("source")?)?, scene.gauge(&n.get("target")?)?);
        let phi = scene.morphism(&m)?;
        let x0 = n.get("m0")?.vec_len(g0.chart_dim())?;
        let x1 = n.get("m1")?.vec_len(g1.chart_dim())?;
        if dry {
            return Ok(None);
        }
        let norms = n.core(phi_obstruction(&g0, &g1, &phi, &x0, &x1, order.min(2)))?;
        let hits = norms.iter().all(|&v| v <= ctx.tol);
        return Ok(Some(keyed(json!({ "hits": hits, "norms": norms, "threshold": ctx.tol }))));
    }
    let (c0, c1): (Coframing, Coframing) = (scene.coframing(&n.get("source")?)?, scene.coframing(&n.get("target")?)?);
    let a = n.get("map")?.mat()?;
    let m0 = n.get("m0")?.vec_len(c0.dim())?;
    let m1 = n.get("m1")?.vec_len(c1.dim())?;
    let grid = match n.opt("integrate") {
        Some(g) => Some((positive(&g.get("radius")?)?, g.opt("per_axis").map_or(Ok(5), |k| k.usize())?)),
        None => None,
    };
    if dry {
        return Ok(None);
    }
    let r = n.core(hits_to_order(&c0, &c1, &a, &m0, &m1, order, ctx.tol))?;
    let mut json = to_json(&r);
    if let Some((radius, k)) = grid {
        let gr = n.core(integrate_morphism_grid(&c0, &c1, &a, &m0, &m1, radius, k, ctx.tol))?;
        json["grid"] = to_json(&gr);
    }
    Ok(Some(keyed(json)))
}

fn points(n: &Node, g: &CartanGauge) -> Res<Vec<Vec<f64>>> {
    if let Some(p) = n.opt("points") {
        return p.items()?.iter().map(|x| x.vec_len(g.chart_dim())).collect();
    }
    let k = n.get("grid")?;
    let pts = g.chart.sample_grid(k.usize()?);
    if pts.is_empty() {
        return Err(invalid(&k.path, "no grid point lies inside the chart"));
    }
    Ok(pts)
}

pub fn curvature_cmd(scene: &Scene, _ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("curvature")?;
    let g = scene.gauge(&n.get("gauge")?)?;
    let pts = points(&n, &g)?;
    let d = depth(&n, "depth", 2)?;
    let check = match n.opt("disguise") {
        Some(dn) => Some((scene.morphism(&dn.get("morphism")?)?, scene.gauge(&dn.get("target")?)?)),
        None => None,
    };
    if dry {
        return Ok(None);
    }
    let mut samples = Vec::new();
    for x in &pts {
        samples.push(to_json(&n.core(curvature_tower(&g, x, d))?));
    }
    let mut json = json!({ "samples": samples });
    if let Some((phi, g1)) = check {
        let mut worst: f64 = 0.0;
        for x in &pts {
            worst = worst.max(n.core(disguise_residual(&g, &phi, &g1, x))?);
        }
        json["disguise_residual"] = json!(worst);
    }
    Ok(Some(keyed(json)))
}

pub fn jacobi_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("jacobi")?;
    let g = scene.gauge(&n.get("gauge")?)?;
    let start = n.get("start")?.vec_len(g.chart_dim())?;
    let frame = match n.opt("frame") {
        Some(f) => square(&f, g.model.g.size)?,
        None => {
            let angle = n.opt("angle").map_or(Ok(0.0), |a| a.f64())?;
            n.core(projective_rotation(angle))?
        }
    };
    let t_end = positive(&n.get("t_end")?)?;
    let a0 = n.opt("a0").map_or(Ok(vec![0.0, 1.0]), |a| a.vec_len(2))?;
    let method = n.opt("method").map_or(Ok("projective"), |m| m.str())?;
    if method != "projective" && method != "generic" {
        return Err(invalid(&n.get("method")?.path, "expected projective or generic"));
    }
    let conj = n.opt("conjugate").map_or(Ok(false), |c| c.bool())?;
    if dry {
        return Ok(None);
    }
    let geo = n.core(MorphismCurve::geodesic(start, frame, t_end))?;
    let (t, rows, status, mut json) = if method == "projective" {
        let s = n.core(projective_jacobi(&g, &geo, &a0, ctx.tol))?;
        let rows: Vec<Vec<f64>> = s.a_0.iter().zip(&s.a_1).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
        (s.t.clone(), rows, s.status, to_json(&s))
    } else {
        let g0 = n.core(geodesic_model_gauge())?;
        let phi = n.core(geodesic_inclusion())?;
        let s = n.core(integrate_first_variation(&g0, &g, &phi, &geo, &a0, ctx.tol))?;
        (s.t.clone(), s.a.clone(), s.status, to_json(&s))
    };
    if conj {
        json["conjugate_point"] = to_json(&n.core(conjugate_point(&g, &geo, t_end, ctx.tol))?);
    }
    let width = rows.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=width).map(|i| format!("a{i}")));
    let table = Table { header, rows: t.iter().zip(&rows).map(|(t, r)| std::iter::once(Cell::Float(*t)).chain(r.iter().map(|v| Cell::Float(*v))).collect()).collect() };
    let failure = if require(&n)? && !status.is_completed() { Some(incomplete(&n.path, &status)) } else { None };
    Ok(Some(Report { json, table, failure }))
}

fn geodesic_start(n: &Node) -> Res<GeodesicStart> {
    Ok(GeodesicStart { point: n.get("point")?.vec_len(2)?, direction: n.get("direction")?.vec_len(2)? })
}

pub fn roll_cmd(scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    let n = scene.task("roll")?;
    let pair = n.get("surfaces")?.items()?;
    if pair.len() != 2 {
        return Err(invalid(&n.get("surfaces")?.path, "expected two surfaces"));
    }
    let (s1, s2) = (scene.surface(&pair[0])?, scene.surface(&pair[1])?);
    let rs = n.core(rolling_space(&s1, &s2))?;
    let samples = n.opt("samples").map_or(Ok(20), |k| k.usize())?;
    let ch = match n.opt("characteristic") {
        Some(c) => Some((
            geodesic_start(&c.get("a")?)?,
            geodesic_start(&c.get("b")?)?,
            c.opt("ratio").map_or(Ok(1.0), |r| positive(&r))?,
            c.get("t_span")?.span()?,
            c.path.clone(),
        )),
        None => None,
    };
    if dry {
        return Ok(None);
    }
    let (lo, hi) = rs.chart.finite_box();
    let mut pts = Vec::new();
    let mut idx = ctx.seed;
    while pts.len() < samples && idx < ctx.seed + 1000 * samples.max(1) {
        idx += 1;
        let p: Vec<f64> = (0..5).map(|i| lo[i] + (0.1 + 0.8 * halton(idx, i)) * (hi[i] - lo[i])).collect();
        if rs.chart.contains(&p) {
            pts.push(p);
        }
    }
    let ranks = pts.iter().map(|p| n.core(growth_ranks(&rs, p)).map(|(a, b, c)| [a, b, c])).collect::<Res<Vec<_>>>()?;
    let mut json = json!({ "points": pts, "ranks": ranks });
    let mut table = Table::new(&["x1", "x2", "x3", "x4", "x5", "r0", "r1", "r2"]);
    for (p, r) in pts.iter().zip(&ranks) {
        table.rows.push(p.iter().map(|v| Cell::Float(*v)).chain(r.iter().map(|v| Cell::Int(*v as i64))).collect());
    }
    let mut failure = None;
    if let Some((a, b, ratio, span, path)) = ch {
        let c = characteristic_curve(&rs, &a, &b, ratio, span, ctx.tol).map_err(|e| crate::scene::core(&path, e))?;
        let tang = n.core(tangency_residual(&rs, &c.curve))?;
        let geo = [n.core(geodesic_residual(&rs.s, &c.lift))?, n.core(geodesic_residual(&rs.s2, &c.lift2))?];
        json["characteristic"] = json!({ "curve": to_json(&c.curve), "tangency_residual": tang, "geodesic_residuals": geo });
        table = trajectory_table(&c.curve);
        if require(&n)? && !c.curve.status.is_completed() {
            failure = Some(incomplete(&path, &c.curve.status));
        }
    }
    Ok(Some(Report { json, table, failure }))
}

pub fn lens_cmd(qmax: u64) -> Res<Report> {
    let rows = survey(qmax).map_err(|e| Failure::Usage(format!("--qmax: {e}")))?;
    let mut table = Table::new(&["p1", "q1", "p2", "q2", "formula_p1", "formula_p2", "oracle_p1", "oracle_p2", "agree", "anomaly"]);
    for r in &rows {
        let c = r.action;
        let mut row: Vec<Cell> = [c.p1, c.q1, c.p2, c.q2].iter().map(|v| Cell::Int(*v as i64)).collect();
        row.extend([r.formula_p1, r.formula_p2, r.oracle_p1, r.oracle_p2, r.agree].map(Cell::Bool));
        row.push(Cell::Text(r.anomaly.join(";")));
        table.rows.push(row);
    }
    Ok(Report { json: to_json(&rows), table, failure: None })
}

pub fn run_task(name: &str, scene: &Scene, ctx: Ctx, dry: bool) -> Res<Option<Report>> {
    match name {
        "flow" => flow_cmd(scene, ctx, dry),
        "develop" => develop_cmd(scene, ctx, dry),
        "probe" => probe_cmd(scene, ctx, dry),
        "torsion" => torsion_cmd(scene, ctx, dry),
        "hit" => hit_cmd(scene, ctx, dry),
        "curvature" => curvature_cmd(scene, ctx, dry),
        "jacobi" => jacobi_cmd(scene, ctx, dry),
        "roll" => roll_cmd(scene, ctx, dry),
        _ => Err(Failure::Usage(format!("unknown task `{name}`"))),
    }
}
