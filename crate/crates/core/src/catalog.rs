//! String ids for catalog models, as used in scenario files.
//!
//! ```text
//! radial(3)              radial(3,2)           constant(3,[1,0])
//! geodesic([1,0,0])      hyperplane(8)         simons-cone
//! sphere(8,1)            cylinder(3,2)
//! homogeneous(1,[[1,0,0]],identity)
//! homogeneous(0,[],constant([0,1]),3)
//! perturbed(radial(3),0.05,7)
//! ```

use std::fmt;

use crate::currents::{self, HypersurfaceModel};
use crate::error::{Error, Result};
use crate::models::{self, Link, ManifoldMap};

/// A parsed catalog entry.
#[derive(Debug, Clone)]
pub enum Model {
    Map(ManifoldMap),
    Surface(HypersurfaceModel),
}

impl Model {
    pub fn id(&self) -> String {
        match self {
            Model::Map(m) => m.id(),
            Model::Surface(s) => s.id(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Map(m) => m.domain_dim(),
            Model::Surface(s) => s.n(),
        }
    }

    pub fn as_map(&self) -> Option<&ManifoldMap> {
        match self {
            Model::Map(m) => Some(m),
            Model::Surface(_) => None,
        }
    }

    pub fn as_surface(&self) -> Option<&HypersurfaceModel> {
        match self {
            Model::Surface(s) => Some(s),
            Model::Map(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    List(Vec<Expr>),
    Call(String, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: &[Expr]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::List(xs) => write!(f, "[{}]", join(xs)),
            Expr::Call(name, args) if args.is_empty() => write!(f, "{name}"),
            Expr::Call(name, args) => write!(f, "{name}({})", join(args)),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, what: &str) -> Error {
        Error::Config(format!("model id `{}`: {what} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                Ok(Expr::List(self.args(']')?))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.src[self.pos..]
                    .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '-' || c == '_')
                {
                    self.pos += 1;
                }
                let name = self.src[start..self.pos].to_string();
                let args = if self.eat('(') { self.args(')')? } else { Vec::new() };
                Ok(Expr::Call(name, args))
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = self.pos;
                while self.src[self.pos..]
                    .starts_with(|c: char| c.is_ascii_digit() || "+-.eE".contains(c))
                {
                    self.pos += 1;
                }
                self.src[start..self.pos]
                    .parse()
                    .map(Expr::Num)
                    .map_err(|_| self.err("bad number"))
            }
            _ => Err(self.err("expected a value")),
        }
    }

    fn args(&mut self, close: char) -> Result<Vec<Expr>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(close) {
                return Ok(out);
            }
            if !self.eat(',') {
                return Err(self.err(&format!("expected `,` or `{close}`")));
            }
        }
    }
}

fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

fn num(e: &Expr, what: &str) -> Result<f64> {
    match e {
        Expr::Num(v) => Ok(*v),
        _ => Err(Error::Config(format!("{what}: expected a number, got `{e}`"))),
    }
}

fn count(e: &Expr, what: &str) -> Result<usize> {
    let v = num(e, what)?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Config(format!("{what}: expected a nonnegative integer, got {v}")));
    }
    Ok(v as usize)
}

/// A vector written `[a,b,c]`; a bare list of numbers is accepted too.
fn vector(args: &[Expr], what: &str) -> Result<Vec<f64>> {
    match args {
        [Expr::List(xs)] => xs.iter().map(|x| num(x, what)).collect(),
        _ => args.iter().map(|x| num(x, what)).collect(),
    }
}

fn arity(name: &str, args: &[Expr], allowed: &[usize]) -> Result<()> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "`{name}` takes {allowed:?} arguments, got {}",
            args.len()
        )))
    }
}

fn link(e: &Expr) -> Result<Link> {
    match e {
        Expr::Call(name, args) if name == "identity" && args.is_empty() => Ok(Link::Identity),
        Expr::Call(name, args) if name == "constant" => Ok(Link::Constant(vector(args, "link value")?)),
        _ => Err(Error::UnknownModel(format!("link `{e}`"))),
    }
}

fn build(e: &Expr, radius: Option<f64>) -> Result<Model> {
    let Expr::Call(name, args) = e else {
        return Err(Error::Config(format!("expected a model id, got `{e}`")));
    };
    let map = |m: ManifoldMap| -> Result<Model> {
        Ok(Model::Map(match radius {
            Some(r) if r > 0.0 => m.with_radius(r),
            Some(r) => return Err(Error::Config(format!("domain radius {r}"))),
            None => m,
        }))
    };
    let surface = |s: HypersurfaceModel| -> Result<Model> {
        Ok(Model::Surface(match radius {
            Some(r) => s.with_working_radius(r)?,
            None => s,
        }))
    };
    match name.as_str() {
        "radial" => {
            arity(name, args, &[1, 2])?;
            let n = count(&args[0], "radial n")?;
            if let Some(m) = args.get(1) {
                let m = count(m, "radial m")?;
                if m + 1 != n {
                    return Err(Error::InvalidModel(format!(
                        "radial({n},{m}): the target of x/|x| is S^{}",
                        n.saturating_sub(1)
                    )));
                }
            }
            map(models::radial(n)?)
        }
        "constant" => {
            arity(name, args, &[2])?;
            let n = count(&args[0], "constant n")?;
            map(models::constant(n, &vector(&args[1..], "constant value")?)?)
        }
        "geodesic" => map(models::geodesic(&vector(args, "geodesic frequency")?)?),
        "homogeneous" => {
            arity(name, args, &[3, 4])?;
            let k = count(&args[0], "homogeneous k")?;
            let Expr::List(vs) = &args[1] else {
                return Err(Error::Config("homogeneous plane must be a list of vectors".into()));
            };
            let plane = vs
                .iter()
                .map(|v| vector(std::slice::from_ref(v), "plane vector"))
                .collect::<Result<Vec<_>>>()?;
            if plane.len() != k {
                return Err(Error::Config(format!("plane has {} vectors, k = {k}", plane.len())));
            }
            let n = match (plane.first(), args.get(3)) {
                (Some(v), None) => v.len(),
                (Some(v), Some(e)) if count(e, "homogeneous n")? == v.len() => v.len(),
                (None, Some(e)) => count(e, "homogeneous n")?,
                _ => {
                    return Err(Error::Config(
                        "homogeneous: give the dimension when the plane is empty".into(),
                    ))
                }
            };
            let h = models::make_homogeneous(&vec![0.0; n], &plane, link(&args[2])?)?;
            map(h.into_map(radius.unwrap_or(models::DEFAULT_RADIUS)))
        }
        "perturbed" => {
            arity(name, args, &[3])?;
            let Model::Map(base) = build(&args[0], radius)? else {
                return Err(Error::InvalidModel("perturbed needs a map as its base".into()));
            };
            let amp = num(&args[1], "amplitude")?;
            let seed = count(&args[2], "seed")? as u64;
            Ok(Model::Map(models::perturbed(base, amp, seed)))
        }
        "hyperplane" => {
            arity(name, args, &[1])?;
            surface(currents::hyperplane(count(&args[0], "hyperplane n")?)?)
        }
        "simons-cone" => {
            arity(name, args, &[0])?;
            surface(currents::simons_cone()?)
        }
        "sphere" => {
            arity(name, args, &[2])?;
            surface(currents::sphere(count(&args[0], "sphere n")?, num(&args[1], "sphere R")?)?)
        }
        "cylinder" => {
            arity(name, args, &[2])?;
            surface(currents::cylinder(
                count(&args[0], "cylinder n")?,
                count(&args[1], "cylinder axis")?,
            )?)
        }
        _ => Err(Error::UnknownModel(e.to_string())),
    }
}

/// Parse a model id; `domain_radius` overrides the default domain or
/// working radius.
pub fn parse_model(id: &str, domain_radius: Option<f64>) -> Result<Model> {
    build(&parse_expr(id)?, domain_radius)
}

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub pattern: &'static str,
    pub example: &'static str,
    pub summary: &'static str,
}

pub fn catalog() -> &'static [CatalogEntry] {
    &[
        CatalogEntry {
            pattern: "radial(n[,m])",
            example: "radial(3,2)",
            summary: "x/|x| : B^n -> S^{n-1}, singular at 0 (m = n-1)",
        },
        CatalogEntry {
            pattern: "constant(n,[w..])",
            example: "constant(3,[0,1])",
            summary: "constant map into the unit sphere",
        },
        CatalogEntry {
            pattern: "geodesic([a..])",
            example: "geodesic([1,0,0])",
            summary: "(cos a.x, sin a.x) into S^1",
        },
        CatalogEntry {
            pattern: "homogeneous(k,[[plane]],link[,n])",
            example: "homogeneous(1,[[1,0,0]],identity)",
            summary: "k-homogeneous map at 0; link is identity or constant([w..])",
        },
        CatalogEntry {
            pattern: "perturbed(base,amplitude,seed)",
            example: "perturbed(radial(3),0.05,7)",
            summary: "base map bent by a smooth random field, renormalized",
        },
        CatalogEntry {
            pattern: "hyperplane(n)",
            example: "hyperplane(8)",
            summary: "{x_n = 0} in R^n",
        },
        CatalogEntry {
            pattern: "simons-cone",
            example: "simons-cone",
            summary: "{|u| = |v|} in R^4 x R^4, singular at 0",
        },
        CatalogEntry {
            pattern: "sphere(n,R)",
            example: "sphere(8,1)",
            summary: "round sphere of radius R about 0",
        },
        CatalogEntry {
            pattern: "cylinder(n,axis)",
            example: "cylinder(3,2)",
            summary: "S^{n-2} x R along a coordinate axis",
        },
    ]
}
