//! Built-in example systems. Each preset is stored as model-spec text, so
//! `to_text` output doubles as a template for overriding parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec_file::ModelSpecFile;
use crate::error::{Error, Result};
use crate::oracle::{Cell, ExpectedPattern, YesNo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig1d,
    GenEe1,
    GenEe2,
    GenEe3,
    Postnl,
    HoyerBivariateAn,
    LinearGaussianBivariate,
}

impl PresetName {
    pub const ALL: [PresetName; 10] = [
        PresetName::Fig1a,
        PresetName::Fig1b,
        PresetName::Fig1c,
        PresetName::Fig1d,
        PresetName::GenEe1,
        PresetName::GenEe2,
        PresetName::GenEe3,
        PresetName::Postnl,
        PresetName::HoyerBivariateAn,
        PresetName::LinearGaussianBivariate,
    ];

    pub const FIG1: [PresetName; 4] = [PresetName::Fig1a, PresetName::Fig1b, PresetName::Fig1c, PresetName::Fig1d];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig1a => "fig1a",
            PresetName::Fig1b => "fig1b",
            PresetName::Fig1c => "fig1c",
            PresetName::Fig1d => "fig1d",
            PresetName::GenEe1 => "gen_ee1",
            PresetName::GenEe2 => "gen_ee2",
            PresetName::GenEe3 => "gen_ee3",
            PresetName::Postnl => "postnl",
            PresetName::HoyerBivariateAn => "hoyer_bivariate_an",
            PresetName::LinearGaussianBivariate => "linear_gaussian_bivariate",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset {
                name: s.to_string(),
                valid: PresetName::ALL.map(|p| p.as_str()).join(", "),
            })
    }
}

/// A preset model together with the roles used by the pattern table and
/// the pattern it is expected to produce.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub spec: ModelSpecFile,
    pub x: String,
    pub y: String,
    pub z: Option<String>,
    pub expected: ExpectedPattern,
}

impl Preset {
    pub fn model(&self) -> &crate::scm::ScmModel {
        &self.spec.model
    }

    pub fn pool(&self) -> Vec<String> {
        self.z.iter().cloned().collect()
    }
}

use Cell::{Dep as D, Indep as I};

fn text(name: PresetName) -> &'static str {
    match name {
        PresetName::Fig1a => "\
description: mixed model; random coefficient E on hidden V enters Y only
x: X
y: Y
pool: Z
node Z observed
node X observed
node V hidden
node E hidden
node Y observed
noise eta_z gaussian 0 1
noise eta_x gaussian 0 1
noise eta_v gaussian 0 1
noise eta_e gaussian 0 1
noise eta_y gaussian 0 1
Z = eta_z
X = (+ Z eta_x)
V = eta_v
E = eta_e
Y = (+ (* 1.5 X) (* 0.8 Z) (* 1.5 E V) eta_y)
",
        PresetName::Fig1b => "\
description: mixed model; random coefficient E on hidden V enters X, making X a collider
x: X
y: Y
pool: Z
node Z observed
node V hidden
node E hidden
node X observed
node Y observed
noise eta_z gaussian 0 1
noise eta_v gaussian 0 1
noise eta_e gaussian 0 1
noise eta_x gaussian 0 0.5
noise eta_y gaussian 0 2
Z = eta_z
V = eta_v
E = eta_e
X = (+ (* 1.5 Z) (* 1.5 E V) eta_x)
Y = (+ (* 1.5 X) (* 1.5 Z) eta_y)
",
        PresetName::Fig1c => "\
description: mixed model; random coefficient E on observed Z enters Y
x: X
y: Y
pool: Z
node Z observed
node X observed
node E hidden
node Y observed
noise eta_z gaussian 0 1
noise eta_x gaussian 0 1
noise eta_e gaussian 0 1
noise eta_y gaussian 0 1
Z = eta_z
X = (+ Z eta_x)
E = eta_e
Y = (+ (* 1.5 X) (* 0.8 Z) (* 1.5 E Z) eta_y)
",
        PresetName::Fig1d => "\
description: linear Gaussian pair; random coefficient E on X enters the common child Z only
x: X
y: Y
pool: Z
node X observed
node Y observed
node E hidden
node Z observed
noise eta_x gaussian 0 1
noise eta_y gaussian 0 1
noise eta_e gaussian 0 1
noise eta_z gaussian 0 0.5
X = eta_x
Y = (+ (* 1.5 X) eta_y)
E = eta_e
Z = (+ X (* 1.5 E X) eta_z)
",
        PresetName::GenEe1 => "\
description: linear X and Z with a nonlinear hidden-noise term in Y
x: X
y: Y
pool: Z
node Z observed
node X observed
node V hidden
node E hidden
node Y observed
noise eta_z gaussian 0 1
noise eta_x gaussian 0 1
noise eta_v gaussian 0 1
noise eta_e gaussian 0 1
noise eps_y laplace 0 0.7
Z = eta_z
X = (+ Z eta_x)
V = eta_v
E = eta_e
Y = (+ (* 1.5 X) (* 0.8 Z) (* 1.5 E V) (* 0.5 (tanh V)) eps_y)
",
        PresetName::GenEe2 => "\
description: nonlinear X given Z; Y noise scale modulated by Z
x: X
y: Y
pool: Z
node Z observed
node X observed
node V hidden
node E hidden
node Y observed
noise eps_z uniform -2 2
noise eps_x laplace 0 0.7
noise eta_v gaussian 0 1
noise eta_e gaussian 0 1
noise eps_y gaussian 0 1
Z = eps_z
X = (+ (* 1.5 (tanh Z)) eps_x)
V = eta_v
E = eta_e
Y = (+ X (* 0.5 (tanh X)) (* 0.8 Z) (* 1.5 E V) (* (+ 1 (* 0.5 (tanh Z))) eps_y))
",
        PresetName::GenEe3 => "\
description: hidden random-coefficient term in X; nonlinear Y with Z-modulated noise
x: X
y: Y
pool: Z
node Z observed
node V hidden
node E hidden
node X observed
node Y observed
noise eps_z gaussian 0 1
noise eta_v gaussian 0 1
noise eta_e gaussian 0 1
noise eps_x gaussian 0 1
noise eps_y laplace 0 0.7
Z = eps_z
V = eta_v
E = eta_e
X = (+ (* 1.5 Z) (* 1.5 E V) (* 0.5 (tanh V)) eps_x)
Y = (+ (* 1.5 X) (* 0.5 (tanh X)) (* 1.5 Z) (* (+ 1 (* 0.5 (tanh Z))) eps_y))
",
        PresetName::Postnl => "\
description: post-nonlinear equation with invertible outer maps
x: X
y: Y
pool: Z
node Z observed
node X observed
node Y observed
noise eta_z gaussian 0 1
noise eps_x uniform -1.5 1.5
noise eps_y gaussian 0 0.5
Z = eta_z
X = eps_x
Y = (cube (+ (tanh (+ (* 0.8 X) (* 0.5 Z) eps_y)) (* 0.5 X)))
",
        PresetName::HoyerBivariateAn => "\
description: cubic additive noise pair with uniform noise
x: X
y: Y
node X observed
node Y observed
noise eps_x uniform -2 2
noise eps_y uniform -1 1
X = eps_x
Y = (+ (cube X) X eps_y)
",
        PresetName::LinearGaussianBivariate => "\
description: linear Gaussian pair
x: X
y: Y
node X observed
node Y observed
noise eta_x gaussian 0 1
noise eta_y gaussian 0 1
X = eta_x
Y = (+ X eta_y)
",
    }
}

fn expected(name: PresetName) -> ExpectedPattern {
    let full = |c: [Cell; 4], d| ExpectedPattern {
        cells: c.map(Some),
        decision: Some(d),
    };
    match name {
        PresetName::Fig1a => full([I, D, I, D], YesNo::Yes),
        PresetName::Fig1b => full([D, D, I, D], YesNo::Yes),
        PresetName::Fig1c => full([D, D, I, I], YesNo::No),
        PresetName::Fig1d => full([I, I, I, D], YesNo::No),
        PresetName::GenEe1 => full([I, D, I, D], YesNo::Yes),
        PresetName::GenEe2 => ExpectedPattern {
            cells: [None, None, Some(I), Some(D)],
            decision: Some(YesNo::Yes),
        },
        PresetName::GenEe3 => ExpectedPattern {
            cells: [None, Some(D), Some(I), Some(D)],
            decision: Some(YesNo::Yes),
        },
        PresetName::Postnl => ExpectedPattern {
            cells: [None; 4],
            decision: None,
        },
        PresetName::HoyerBivariateAn => ExpectedPattern {
            cells: [Some(I), Some(D), None, None],
            decision: Some(YesNo::Yes),
        },
        PresetName::LinearGaussianBivariate => ExpectedPattern {
            cells: [Some(I), Some(I), None, None],
            decision: Some(YesNo::No),
        },
    }
}

pub fn preset_text(name: PresetName) -> &'static str {
    text(name)
}

pub fn preset(name: PresetName) -> Preset {
    let spec = ModelSpecFile::parse(text(name)).expect("built-in preset parses");
    let x = spec.x.clone().expect("preset declares x");
    let y = spec.y.clone().expect("preset declares y");
    let z = spec.pool.first().cloned();
    Preset {
        name,
        spec,
        x,
        y,
        z,
        expected: expected(name),
    }
}

/// Looks a preset up by its string name.
pub fn preset_by_name(name: &str) -> Result<Preset> {
    Ok(preset(name.parse()?))
}
