use std::f64::consts::TAU;
use std::path::PathBuf;

use kgeodesic::classify::{self, KOptions, MinimalK};
use kgeodesic::distance;
use kgeodesic::energy::{self, BalanceTolerances, FindOptions, SearchMethod, TuplePoint};
use kgeodesic::export::{comment_header, num, to_json};
use kgeodesic::geodesic::ClosedGeodesic;
use kgeodesic::sweep::{self, SweepOptions};
use kgeodesic::{Sheet, SurfaceModel, SurfacePoint, TangentVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{parse_points, Cli, Command, GeodesicArg, Method, TolArgs};
use crate::Failure;

type Outcome = std::result::Result<(), Failure>;

/// Everything that determines a run's output. The output directory is left
/// out so that artifacts written to different places compare equal.
struct RunConfig {
    lines: Vec<String>,
    out: PathBuf,
}

impl RunConfig {
    fn new(cli: &Cli, surface: &SurfaceModel) -> Self {
        let cmd = &cli.command;
        let mut lines = vec![
            format!("kgeo {}", cmd.name()),
            format!("surface: {surface}"),
            format!("seed: {}", cmd.common().seed),
        ];
        lines.extend(format!("{cmd:#?}").lines().map(str::to_string));
        let out = cli
            .out
            .clone()
            .or_else(|| std::env::var_os("KGEO_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("kgeo-out"));
        Self { lines, out }
    }

    fn text(&self) -> String {
        self.lines.join("\n")
    }

    fn csv_header(&self) -> String {
        comment_header(&self.text())
    }

    fn write(&self, name: &str, content: &str) -> Outcome {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, content)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn write_json(&self, name: &str, mut body: serde_json::Value) -> Outcome {
        if let Some(obj) = body.as_object_mut() {
            obj.insert("config".into(), json!(self.lines));
        }
        self.write(name, &(to_json(&body) + "\n"))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn points(s: &str) -> Result<Vec<SurfacePoint>, Failure> {
    parse_points(s).map_err(usage)
}

fn tolerances(surface: &SurfaceModel, t: &TolArgs) -> BalanceTolerances {
    let mut tol = BalanceTolerances::for_surface(surface);
    if let Some(s) = t.spacing_tol {
        tol.spacing = s;
    }
    if let Some(a) = t.antipodal_tol {
        tol.antipodal = a;
    }
    tol
}

fn pt(p: &SurfacePoint) -> String {
    match p.sheet {
        Sheet::Front => format!("({}, {})", num(p.u), num(p.v)),
        Sheet::Back => format!("({}, {}, back)", num(p.u), num(p.v)),
    }
}

fn numbers(s: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let xs: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("`{s}`: {e}")))?;
    if xs.len() != n {
        return Err(usage(format!("`{s}`: expected {n} numbers")));
    }
    Ok(xs)
}

/// Parses one geodesic description; see `GeodesicArg`.
fn geodesic(surface: &SurfaceModel, spec: Option<&str>) -> Result<ClosedGeodesic, Failure> {
    let spec = match spec {
        Some(s) => s.trim().to_string(),
        None => match surface {
            SurfaceModel::FlatTorus { .. } => "line:1,0".into(),
            SurfaceModel::DoubledPolygon(_) => "over-under".into(),
            _ => "equator".into(),
        },
    };
    let (head, tail) = spec.split_once(':').unwrap_or((spec.as_str(), ""));
    let g = match head {
        "equator" => ClosedGeodesic::equator(surface)?,
        "meridian" => ClosedGeodesic::meridian(surface, numbers(tail, 1)?[0])?,
        "great-circle" => {
            let x = numbers(tail, 3)?;
            ClosedGeodesic::great_circle(surface, &SurfacePoint::new(x[0], x[1]), &Vector2::new(x[2].cos(), x[2].sin()))?
        }
        "line" => {
            let (dir, at) = tail.split_once('@').unwrap_or((tail, "0,0"));
            let mn = numbers(dir, 2)?;
            let p = numbers(at, 2)?;
            if mn.iter().any(|x| x.fract() != 0.0) {
                return Err(usage(format!("`{dir}`: lattice direction must be integral")));
            }
            ClosedGeodesic::torus_line(surface, &SurfacePoint::new(p[0], p[1]), mn[0] as i64, mn[1] as i64)?
        }
        "over-under" => ClosedGeodesic::over_under(surface, true)?,
        "under-over" => ClosedGeodesic::over_under(surface, false)?,
        other => return Err(usage(format!("unknown geodesic `{other}`"))),
    };
    Ok(g)
}

fn random_point(surface: &SurfaceModel, rng: &mut ChaCha8Rng) -> SurfacePoint {
    match surface {
        SurfaceModel::FlatTorus { a, b } => SurfacePoint::new(rng.gen_range(0.0..*a), rng.gen_range(0.0..*b)),
        SurfaceModel::DoubledPolygon(poly) => {
            let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
            for v in poly.vertices() {
                lo = lo.inf(v);
                hi = hi.sup(v);
            }
            loop {
                let p = Vector2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                if poly.contains(&p) && poly.on_edge(&p).is_none() {
                    let sheet = if rng.gen_bool(0.5) { Sheet::Front } else { Sheet::Back };
                    return SurfacePoint::on_sheet(p.x, p.y, sheet);
                }
            }
        }
        _ => {
            let z: f64 = rng.gen_range(-0.99..0.99);
            SurfacePoint::new(z.acos(), rng.gen_range(0.0..TAU))
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let surface = SurfaceModel::from_config(&cli.command.common().surface)?;
    let cfg = RunConfig::new(cli, &surface);
    let s = &surface;
    match &cli.command {
        Command::Distance { p, q, .. } => {
            let d = distance::distance(s, q, p)?;
            println!("distance {}", num(d));
            cfg.write_json("distance.json", json!({"p": [p.u, p.v], "q": [q.u, q.v], "distance": d}))
        }
        Command::Minimizers { p, q, fan, .. } => {
            let set = distance::minimizers_with(s, q, p, *fan as usize)?;
            let class = distance::classify_set(s, &set);
            println!("distance {}", num(set.distance));
            println!("multiplicity {}{}", set.multiplicity(), if set.continuum { " (continuum)" } else { "" });
            println!("kind {:?}", class.kind);
            for d in set.directions() {
                println!("direction ({}, {})", num(d.x), num(d.y));
            }
            let mut body = set.to_json();
            body["kind"] = json!(format!("{:?}", class.kind));
            cfg.write_json("minimizers.json", body)
        }
        Command::Ddist { p, q, v, frame, .. } => {
            let d = if *frame {
                distance::directional_derivative_frame(s, p, q, &Vector2::new(v.0, v.1))?
            } else {
                distance::directional_derivative(s, p, q, &TangentVector::new(v.0, v.1))?
            };
            println!("derivative {}", num(d));
            cfg.write_json("ddist.json", json!({"p": [p.u, p.v], "q": [q.u, q.v], "v": [v.0, v.1], "frame": frame, "derivative": d}))
        }
        Command::Energy { points: spec, .. } => {
            let x = TuplePoint::new(s, points(spec)?)?;
            let e = energy::uniform_energy(s, &x)?;
            println!("energy {}", num(e));
            let grad = match energy::energy_gradient(s, &x) {
                Ok(g) => {
                    for (i, v) in g.iter().enumerate() {
                        println!("gradient {i} ({}, {})", num(v.a), num(v.b));
                    }
                    json!(g.iter().map(|v| [v.a, v.b]).collect::<Vec<_>>())
                }
                Err(e @ kgeodesic::Error::OrdinaryPair(_)) => {
                    println!("gradient undefined: {e}");
                    json!(null)
                }
                Err(e) => return Err(e.into()),
            };
            cfg.write_json(
                "energy.json",
                json!({"tuple": x.to_json(), "distances": x.distances(s)?, "energy": e, "gradient": grad}),
            )
        }
        Command::Balance { points: spec, tol, .. } => {
            let x = TuplePoint::new(s, points(spec)?)?;
            let report = match energy::balance_test(s, &x, &tolerances(s, tol)) {
                Ok(r) => r,
                Err(kgeodesic::Error::ConePointVertex(cd)) => {
                    println!(
                        "cone vertex {} angle {} split ({}, {}) split_ok {}",
                        cd.vertex,
                        num(cd.cone_angle),
                        num(cd.parts.0),
                        num(cd.parts.1),
                        cd.split_ok
                    );
                    cfg.write_json("balance.json", json!({"tuple": x.to_json(), "cone": serde_json::to_value(cd).unwrap_or_default()}))?;
                    return Err(kgeodesic::Error::ConePointVertex(cd).into());
                }
                Err(e) => return Err(e.into()),
            };
            println!("class {:?}", report.class());
            println!("labels {}", report.labels().join(" "));
            println!("spacing_residual {}", num(report.spacing_residual));
            println!("antipodal_residual {}", num(report.antipodal_residual));
            let geos = if report.balanced {
                energy::associated_geodesics(s, &x, &report)?
            } else {
                Vec::new()
            };
            println!("associated_geodesics {}", geos.len());
            cfg.write_json(
                "balance.json",
                json!({
                    "tuple": x.to_json(),
                    "class": format!("{:?}", report.class()),
                    "report": serde_json::to_value(&report).unwrap_or_default(),
                    "associated": geos.iter().map(|g| json!({
                        "length": g.length(),
                        "start": [g.arc.start.u, g.arc.start.v],
                        "direction": [g.arc.start_dir.x, g.arc.start_dir.y],
                    })).collect::<Vec<_>>(),
                }),
            )
        }
        Command::Find { common, k, from, method, max_iter, tol } => {
            let k = *k as usize;
            let seed = match from {
                Some(spec) => points(spec)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
                    (0..k).map(|_| random_point(s, &mut rng)).collect()
                }
            };
            if seed.len() != k {
                return Err(usage(format!("--from has {} points, expected {k}", seed.len())));
            }
            let seed = TuplePoint::new(s, seed)?;
            let opts = FindOptions {
                method: match method {
                    Method::Newton => SearchMethod::Newton,
                    Method::Descent => SearchMethod::Descent,
                },
                tol: (tol.spacing_tol.is_some() || tol.antipodal_tol.is_some()).then(|| tolerances(s, tol)),
                max_iter: *max_iter,
                ..FindOptions::default()
            };
            let res = energy::find_balanced(s, k, &seed, &opts)?;
            println!("outcome {:?} after {} iterations", res.outcome, res.iterations);
            for p in res.tuple.points() {
                println!("point {}", pt(p));
            }
            if let Some(r) = &res.report {
                println!("class {:?}", r.class());
            }
            cfg.write("find_trace.csv", &res.trace_csv(&cfg.csv_header()))?;
            cfg.write_json(
                "find.json",
                json!({
                    "seed": seed.to_json(),
                    "tuple": res.tuple.to_json(),
                    "outcome": format!("{:?}", res.outcome),
                    "iterations": res.iterations,
                    "report": res.report.as_ref().map(|r| serde_json::to_value(r).unwrap_or_default()),
                }),
            )
        }
        Command::Classify { k, geodesic: g, samples, minimal_k, k_max, .. } => classify_cmd(&cfg, s, g, *k, *samples, *minimal_k, *k_max),
        Command::Gs { p, q, enumerate, grid, .. } => {
            if *enumerate {
                let pts = classify::enumerate_gs_critical(s, p, *grid as usize)?;
                println!("{} critical points", pts.len());
                let mut csv = cfg.csv_header();
                csv.push_str("u,v,sheet,distance,multiplicity,max_gap\n");
                for c in &pts {
                    println!("critical {} distance {} multiplicity {}", pt(&c.q), num(c.distance), c.multiplicity);
                    csv.push_str(&format!(
                        "{},{},{:?},{},{},{}\n",
                        num(c.q.u),
                        num(c.q.v),
                        c.q.sheet,
                        num(c.distance),
                        c.multiplicity,
                        num(c.max_gap)
                    ));
                }
                cfg.write("gs_critical.csv", &csv)
            } else {
                let q = q.ok_or_else(|| usage("--q is required without --enumerate"))?;
                let r = classify::gs_critical(s, p, &q)?;
                println!("critical {}", r.critical);
                println!("max_gap {}", num(r.max_gap));
                if let Some(w) = r.witness {
                    println!("witness ({}, {})", num(w[0]), num(w[1]));
                }
                cfg.write_json("gs.json", serde_json::to_value(&r).unwrap_or_default())
            }
        }
        Command::Sweep { k, bracket, points: n, minimal_k, k_max, classes, .. } => {
            let (lo, hi) = *bracket;
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return Err(usage(format!("bracket [{lo}, {hi}] must lie inside (0, 1)")));
            }
            let k = *k as usize;
            let c0 = sweep::find_threshold((lo, hi), k)?;
            println!("c0 {}", num(c0));
            let n = *n as usize;
            let cs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let opts = SweepOptions {
                k,
                k_max: *k_max as usize,
                verdicts: true,
                minimal_k: *minimal_k,
                classes: *classes,
            };
            let records = sweep::sweep_table(&cs, &opts)?;
            let mut header = cfg.text();
            header.push_str(&format!("\nc0: {}", num(c0)));
            let csv = sweep::sweep_csv(&records, &comment_header(&header));
            print!("{}", csv.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
            cfg.write("sweep.csv", &csv)?;
            cfg.write("sweep.svg", &sweep::sweep_svg(&records, k, Some(c0), &header))
        }
        Command::VerifyThm { geodesic: g, candidates, h, .. } => {
            let gamma = geodesic(s, g.geodesic.as_deref())?;
            let cands = candidates
                .split(';')
                .filter(|c| !c.trim().is_empty())
                .map(|c| geodesic(s, Some(c)))
                .collect::<Result<Vec<_>, _>>()?;
            let h = match h {
                Some(h) => *h,
                None => s
                    .min_gauss_curvature()
                    .filter(|&h| h > 0.0)
                    .ok_or_else(|| usage("this surface has no positive curvature bound; pass --h"))?,
            };
            let r = classify::verify_theorem_behavior(s, &gamma, &cands, h)?;
            println!("length {} bound {}", num(r.length), num(r.bound));
            for c in &r.checks {
                println!(
                    "candidate {} half={} intersections={} length_ok={} antipode_error={}",
                    c.index,
                    c.half_geodesic,
                    c.intersections.len(),
                    c.length_ok,
                    c.antipode_error.map_or("na".into(), num)
                );
            }
            println!("violations {}", r.violations);
            cfg.write_json("verify_thm.json", serde_json::to_value(&r).unwrap_or_default())
        }
    }
}

fn classify_cmd(
    cfg: &RunConfig,
    s: &SurfaceModel,
    g: &GeodesicArg,
    k: u64,
    samples: u64,
    minimal_k: bool,
    k_max: u64,
) -> Outcome {
    let g = geodesic(s, g.geodesic.as_deref())?;
    let opts = KOptions {
        samples: samples as usize,
        ..KOptions::default()
    };
    let r = classify::is_k_geodesic_with(s, &g, k as usize, &opts)?;
    println!("length {}", num(r.length));
    println!("verdict {:?}", r.verdict);
    println!("defect {}", num(r.defect));
    let mut header = cfg.text();
    if minimal_k {
        let m = classify::minimal_k_with(s, &g, k_max as usize, &opts)?;
        let line = match m {
            MinimalK::Found(k) => format!("minimal_k {k}"),
            MinimalK::NotFound(k) => format!("minimal_k none up to {k}"),
        };
        println!("{line}");
        header.push('\n');
        header.push_str(&line);
    }
    cfg.write("classify.csv", &classify::report_csv(&r, &comment_header(&header)))?;
    cfg.write("classify.svg", &classify::report_svg(s, &g, &r, &header))
}
