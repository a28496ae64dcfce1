//! Tagged union over every dependence-model family.

use serde::{Deserialize, Serialize};

use crate::asymptotic::{MaxStableSpec, RParetoSpec};
use crate::conditional::SceSpec;
use crate::error::Result;
use crate::gauss::CovarianceSpec;
use crate::subasymptotic::{HotSpec, HwSpec, ImsSpec, LocationMixSpec, MaxMixSpec, MixtureModel, PairModel, SimModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    GaussianCopula { cov: CovarianceSpec },
    Hot(HotSpec),
    Hw(HwSpec),
    LocationMix(LocationMixSpec),
    MaxStable(MaxStableSpec),
    RPareto(RParetoSpec),
    Ims(ImsSpec),
    MaxMix(MaxMixSpec),
    Sce(SceSpec),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::GaussianCopula { .. } => "gaussian_copula",
            ModelSpec::Hot(_) => "hot",
            ModelSpec::Hw(_) => "hw",
            ModelSpec::LocationMix(_) => "location_mix",
            ModelSpec::MaxStable(_) => "max_stable",
            ModelSpec::RPareto(_) => "r_pareto",
            ModelSpec::Ims(_) => "ims",
            ModelSpec::MaxMix(_) => "max_mix",
            ModelSpec::Sce(_) => "sce",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::GaussianCopula { cov } => cov.validate(),
            ModelSpec::Hot(s) => s.validate(),
            ModelSpec::Hw(s) => s.validate(),
            ModelSpec::LocationMix(s) => s.validate(),
            ModelSpec::MaxStable(s) => s.validate(),
            ModelSpec::RPareto(s) => s.base.validate(),
            ModelSpec::Ims(s) => s.base.validate(),
            ModelSpec::MaxMix(s) => s.validate(),
            ModelSpec::Sce(s) => s.validate(),
        }
    }

    /// The correlation or variogram structure; for max-mixtures, that of the
    /// max-stable component.
    pub fn covariance(&self) -> &CovarianceSpec {
        match self {
            ModelSpec::GaussianCopula { cov } => cov,
            ModelSpec::Hot(s) => &s.cov,
            ModelSpec::Hw(s) => &s.cov,
            ModelSpec::LocationMix(s) => &s.cov,
            ModelSpec::MaxStable(s) => s.covariance(),
            ModelSpec::RPareto(s) => s.base.covariance(),
            ModelSpec::Ims(s) => s.base.covariance(),
            ModelSpec::MaxMix(s) => s.ms.covariance(),
            ModelSpec::Sce(s) => &s.cov,
        }
    }

    /// Applies `f` to every correlation or variogram structure in the model.
    pub fn map_covariances(mut self, f: impl Fn(&mut CovarianceSpec)) -> Self {
        let ms = |m: &mut MaxStableSpec| match m {
            MaxStableSpec::BrownResnick { variogram } => f(variogram),
            MaxStableSpec::ExtremalT { cov, .. } => f(cov),
        };
        match &mut self {
            ModelSpec::GaussianCopula { cov } => f(cov),
            ModelSpec::Hot(s) => f(&mut s.cov),
            ModelSpec::Hw(s) => f(&mut s.cov),
            ModelSpec::LocationMix(s) => f(&mut s.cov),
            ModelSpec::MaxStable(s) => ms(s),
            ModelSpec::RPareto(s) => ms(&mut s.base),
            ModelSpec::Ims(s) => ms(&mut s.base),
            ModelSpec::MaxMix(s) => {
                ms(&mut s.ms);
                ms(&mut s.ims.base);
            }
            ModelSpec::Sce(s) => f(&mut s.cov),
        }
        self
    }

    pub fn as_mixture(&self) -> Option<MixtureModel> {
        match *self {
            ModelSpec::GaussianCopula { cov } => Some(MixtureModel::GaussianCopula { cov }),
            ModelSpec::Hot(s) => Some(MixtureModel::Hot(s)),
            ModelSpec::Hw(s) => Some(MixtureModel::Hw(s)),
            _ => None,
        }
    }

    pub fn as_pair_model(&self) -> Option<PairModel> {
        match *self {
            ModelSpec::Ims(s) => Some(PairModel::Ims(s)),
            ModelSpec::MaxMix(s) => Some(PairModel::MaxMix(s)),
            _ => None,
        }
    }

    pub fn as_sim_model(&self) -> Option<SimModel> {
        match *self {
            ModelSpec::LocationMix(s) => Some(SimModel::LocationMix(s)),
            _ => self.as_mixture().map(SimModel::from),
        }
    }
}

impl From<MixtureModel> for ModelSpec {
    fn from(m: MixtureModel) -> Self {
        match m {
            MixtureModel::GaussianCopula { cov } => ModelSpec::GaussianCopula { cov },
            MixtureModel::Hot(s) => ModelSpec::Hot(s),
            MixtureModel::Hw(s) => ModelSpec::Hw(s),
        }
    }
}

impl From<PairModel> for ModelSpec {
    fn from(m: PairModel) -> Self {
        match m {
            PairModel::Ims(s) => ModelSpec::Ims(s),
            PairModel::MaxMix(s) => ModelSpec::MaxMix(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::RiskFunctional;

    #[test]
    fn toml_round_trip() {
        let models = [
            ModelSpec::GaussianCopula { cov: CovarianceSpec::isotropic(2.0, 1.0) },
            ModelSpec::Hw(HwSpec { delta: 0.6, cov: CovarianceSpec::isotropic(1.0, 0.5) }),
            ModelSpec::RPareto(RParetoSpec { base: MaxStableSpec::brown_resnick(1.0, 1.2), functional: RiskFunctional::Site(3) }),
            ModelSpec::MaxMix(MaxMixSpec {
                a: 0.3,
                ms: MaxStableSpec::extremal_t(2.0, 1.0, 1.0),
                ims: ImsSpec { base: MaxStableSpec::brown_resnick(0.5, 1.0) },
            }),
        ];
        for m in models {
            let s = toml::to_string(&m).unwrap();
            let back: ModelSpec = toml::from_str(&s).unwrap();
            assert_eq!(back, m, "{s}");
        }
    }

    #[test]
    fn covariance_mapping_reaches_every_component() {
        let m = ModelSpec::MaxMix(MaxMixSpec {
            a: 0.5,
            ms: MaxStableSpec::brown_resnick(1.0, 1.0),
            ims: ImsSpec { base: MaxStableSpec::extremal_t(2.0, 1.0, 1.0) },
        });
        let ModelSpec::MaxMix(s) = m.map_covariances(|c| c.phi = 3.0) else { unreachable!() };
        assert_eq!(s.ms.covariance().phi, 3.0);
        assert_eq!(s.ims.base.covariance().phi, 3.0);
    }
}
