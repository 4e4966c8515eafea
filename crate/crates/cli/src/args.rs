use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgeodesic::{Sheet, SurfacePoint};

#[derive(Parser, Debug)]
#[command(
    name = "kgeo",
    version,
    about = "Minimizing closed geodesics and 1/k-geodesics on model surfaces",
    after_help = "Settings may also be read with `--config PATH`, a file of `key = value` lines \
                  (flag names without dashes) whose values override the command line."
)]
pub struct Cli {
    /// Output directory; defaults to $KGEO_OUT_DIR, else ./kgeo-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Surface, e.g. `sphere`, `ellipsoid c=0.9`, `torus a=1 b=1`, `square`, `pentagon`,
    /// `polygon vertices=0,0;2,0;0,1`.
    #[arg(long, default_value = "sphere")]
    pub surface: String,
    /// Seed for randomized sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Intrinsic distance between two points.
    #[command(args_override_self = true)]
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_point)]
        p: SurfacePoint,
        #[arg(long, value_parser = parse_point)]
        q: SurfacePoint,
    },
    /// All minimizing segments from q to p.
    #[command(args_override_self = true)]
    Minimizers {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_point)]
        p: SurfacePoint,
        #[arg(long, value_parser = parse_point)]
        q: SurfacePoint,
        /// Shooting directions of the initial fan.
        #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(8..))]
        fan: u64,
    },
    /// One-sided directional derivative of d_p at q along v.
    #[command(args_override_self = true)]
    Ddist {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_point)]
        p: SurfacePoint,
        #[arg(long, value_parser = parse_point)]
        q: SurfacePoint,
        /// Tangent vector `a,b` at q in chart components.
        #[arg(long, value_parser = parse_pair)]
        v: (f64, f64),
        /// Read v in the orthonormal frame instead of the chart basis.
        #[arg(long)]
        frame: bool,
    },
    /// Uniform energy and its gradient on a tuple.
    #[command(args_override_self = true)]
    Energy {
        #[command(flatten)]
        common: Common,
        /// Tuple `u,v;u,v;...` (append `,back` for the back sheet).
        #[arg(long)]
        points: String,
    },
    /// Balance test of a tuple.
    #[command(args_override_self = true)]
    Balance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: String,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Search for a balanced tuple.
    #[command(args_override_self = true)]
    Find {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
        /// Seed tuple; drawn at random from --seed when absent.
        #[arg(long)]
        from: Option<String>,
        #[arg(long, value_enum, default_value_t = Method::Newton)]
        method: Method,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Decide whether a closed geodesic is a 1/k-geodesic.
    #[command(args_override_self = true)]
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
        #[command(flatten)]
        geodesic: GeodesicArg,
        #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(4..))]
        samples: u64,
        /// Also search for the least k.
        #[arg(long)]
        minimal_k: bool,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(2..))]
        k_max: u64,
    },
    /// Grove–Shiohama criticality of q for d_p, or all critical points.
    #[command(args_override_self = true)]
    Gs {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_point)]
        p: SurfacePoint,
        #[arg(long, value_parser = parse_point, required_unless_present = "enumerate")]
        q: Option<SurfacePoint>,
        #[arg(long)]
        enumerate: bool,
        /// Grid resolution per chart axis for the enumeration.
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(16..))]
        grid: u64,
    },
    /// Parameter sweep over a surface family.
    #[command(args_override_self = true)]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Family::Ellipsoid)]
        family: Family,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
        /// Interval `lo,hi` of the family parameter.
        #[arg(long, value_parser = parse_pair, default_value = "0.2,0.99")]
        bracket: (f64, f64),
        /// Table rows, evenly spaced over the bracket.
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(2..))]
        points: u64,
        #[arg(long)]
        minimal_k: bool,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(2..))]
        k_max: u64,
        /// Build balanced classes along each equator.
        #[arg(long)]
        classes: bool,
    },
    /// Check the intersection and length behaviour of half-geodesics.
    #[command(name = "verify-thm", args_override_self = true)]
    VerifyThm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geodesic: GeodesicArg,
        /// Candidate geodesics separated by `;`, same syntax as --geodesic.
        #[arg(long)]
        candidates: String,
        /// Curvature lower bound; defaults to the surface minimum.
        #[arg(long, value_parser = positive)]
        h: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct TolArgs {
    #[arg(long, value_parser = positive)]
    pub spacing_tol: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub antipodal_tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct GeodesicArg {
    /// `equator`, `meridian:PHI`, `great-circle:U,V,ANGLE`, `line:M,N[@U,V]`,
    /// `over-under` or `under-over`; a surface-dependent default when absent.
    #[arg(long)]
    pub geodesic: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    Descent,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Ellipsoid,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Distance { common, .. }
            | Command::Minimizers { common, .. }
            | Command::Ddist { common, .. }
            | Command::Energy { common, .. }
            | Command::Balance { common, .. }
            | Command::Find { common, .. }
            | Command::Classify { common, .. }
            | Command::Gs { common, .. }
            | Command::Sweep { common, .. }
            | Command::VerifyThm { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Distance { .. } => "distance",
            Command::Minimizers { .. } => "minimizers",
            Command::Ddist { .. } => "ddist",
            Command::Energy { .. } => "energy",
            Command::Balance { .. } => "balance",
            Command::Find { .. } => "find",
            Command::Classify { .. } => "classify",
            Command::Gs { .. } => "gs",
            Command::Sweep { .. } => "sweep",
            Command::VerifyThm { .. } => "verify-thm",
        }
    }
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(format!("non-finite value in `{s}`"));
    }
    Ok((a, b))
}

/// `u,v` or `u,v,back`.
pub fn parse_point(s: &str) -> Result<SurfacePoint, String> {
    let s = s.trim();
    let (body, sheet) = match s.rsplit_once(',') {
        Some((body, tag)) if tag.trim().eq_ignore_ascii_case("back") => (body, Sheet::Back),
        Some((body, tag)) if tag.trim().eq_ignore_ascii_case("front") => (body, Sheet::Front),
        _ => (s, Sheet::Front),
    };
    let (u, v) = parse_pair(body)?;
    Ok(SurfacePoint::on_sheet(u, v, sheet))
}

pub fn parse_points(s: &str) -> Result<Vec<SurfacePoint>, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect()
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("{x} is not positive")),
        Err(e) => Err(e.to_string()),
    }
}

/// Removes `--config PATH` from `argv` and appends the file's settings as
/// flags, so that they take precedence over the command line.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = path else { return Ok(out) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_and_sheets() {
        let p = parse_point("0.5, 0.25,back").unwrap();
        assert_eq!((p.u, p.v, p.sheet), (0.5, 0.25, Sheet::Back));
        assert_eq!(parse_point("1,2").unwrap().sheet, Sheet::Front);
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,nan").is_err());
        assert_eq!(parse_points("0,0;1,0;").unwrap().len(), 2);
    }

    #[test]
    fn config_settings_follow_the_command_line() {
        let dir = std::env::temp_dir().join(format!("kgeo-args-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "k = 3\n# comment\nminimal_k = true\nclasses = false\n").unwrap();
        let argv = ["kgeo", "classify", "--k", "2", "--config", path.to_str().unwrap()].map(String::from).to_vec();
        let merged = merge_config(argv).unwrap();
        assert_eq!(merged, ["kgeo", "classify", "--k", "2", "--k", "3", "--minimal-k"]);
        let cli = Cli::try_parse_from(&merged).unwrap();
        match cli.command {
            Command::Classify { k, minimal_k, .. } => assert_eq!((k, minimal_k), (3, true)),
            other => panic!("{other:?}"),
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn positive_tolerances() {
        assert!(positive("1e-6").is_ok());
        assert!(positive("0").is_err());
        assert!(positive("-1").is_err());
    }
}
