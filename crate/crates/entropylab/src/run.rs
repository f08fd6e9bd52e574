//! Command implementations. Each returns a JSON body; main wraps it in the
//! envelope and persists it.

use crate::config::{CommandKind, Settings};
use crate::LabError;
use entropylab_core::{
    carleson_constant, entropy, generate_weight, joint_bump, maximal_norm, product_bump,
    run_experiment, sawyer_testing, sharpness_search, sparse_norm_general, EpsilonFn, Experiment,
    SparseSpec,
};
use serde::Serialize;

fn to_body<T: Serialize>(value: &T) -> Result<serde_json::Value, LabError> {
    serde_json::to_value(value).map_err(|e| LabError::Config(format!("serialize: {e}")))
}

#[derive(Serialize)]
struct ConstantsBody {
    sigma: entropylab_core::WeightSpec,
    w: entropylab_core::WeightSpec,
    p: f64,
    delta: f64,
    joint_bump: entropylab_core::BumpReport,
    product_bump: entropylab_core::BumpReport,
    entropy_sigma: f64,
    entropy_w: f64,
}

fn constants(settings: &Settings) -> Result<serde_json::Value, LabError> {
    let p = settings.require_p()?;
    let delta = settings.require_delta()?;
    let eps = EpsilonFn::joint(delta)?;
    let sigma_spec = settings.sigma_spec();
    let w_spec = settings.w_spec();
    let sigma = generate_weight(&sigma_spec)?;
    let w = generate_weight(&w_spec)?;
    let root = sigma.root();
    let body = ConstantsBody {
        joint_bump: joint_bump(&sigma, &w, p, &eps)?,
        product_bump: product_bump(&sigma, &w, p, &eps)?,
        entropy_sigma: entropy(&sigma, &root)?,
        entropy_w: entropy(&w, &root)?,
        sigma: sigma_spec,
        w: w_spec,
        p,
        delta,
    };
    to_body(&body)
}

#[derive(Serialize)]
struct NormBody {
    sigma: entropylab_core::WeightSpec,
    w: entropylab_core::WeightSpec,
    p: f64,
    seed: u64,
    maximal: entropylab_core::NormEstimate,
    sparse: entropylab_core::NormEstimate,
    testing: entropylab_core::TestingConstants,
    carleson: entropylab_core::CarlesonReport,
}

fn norm(settings: &Settings) -> Result<serde_json::Value, LabError> {
    let p = settings.require_p()?;
    let params = settings.iteration_params()?;
    let sigma_spec = settings.sigma_spec();
    let w_spec = settings.w_spec();
    let sigma = generate_weight(&sigma_spec)?;
    let w = generate_weight(&w_spec)?;
    if sigma.is_zero() || w.is_zero() {
        return Err(entropylab_core::Error::ZeroWeight.into());
    }
    let sparse_spec = settings.sparse.clone().unwrap_or(SparseSpec::StoppingTree);
    let collection = sparse_spec.resolve(&sigma, &sigma.root())?;
    let body = NormBody {
        maximal: maximal_norm(&sigma, &w, p)?,
        sparse: sparse_norm_general(&collection, &sigma, &w, p, &params)?,
        testing: sawyer_testing(&collection, &sigma, &w, p)?,
        carleson: carleson_constant(&sigma, &collection, p)?,
        sigma: sigma_spec,
        w: w_spec,
        p,
        seed: params.seed,
    };
    to_body(&body)
}

fn verify(settings: &Settings) -> Result<serde_json::Value, LabError> {
    let kind = settings.require_target()?;
    let p = settings.require_p()?;
    let delta = match kind {
        entropylab_core::ExperimentKind::ApAinftyBound => settings.delta.unwrap_or(0.0),
        _ => settings.require_delta()?,
    };
    let params = settings.iteration_params()?;
    let experiment = Experiment {
        kind,
        sigma: settings.sigma_spec(),
        w: settings.w_spec(),
        p,
        delta,
        sparse: settings.sparse.clone(),
        q0: settings.q0,
    };
    to_body(&run_experiment(&experiment, &params)?)
}

fn search(settings: &Settings) -> Result<serde_json::Value, LabError> {
    let kind = settings.require_target()?;
    let p = settings.require_p()?;
    let delta = settings.require_delta()?;
    let seed = settings.require_seed()?;
    let outcome = sharpness_search(
        kind,
        settings.dimension,
        settings.depth,
        p,
        delta,
        settings.budget,
        seed,
    )?;
    to_body(&outcome)
}

#[derive(Serialize)]
struct GenBody {
    spec: entropylab_core::WeightSpec,
    densities: Vec<f64>,
    total_mass: f64,
}

fn gen(settings: &Settings) -> Result<serde_json::Value, LabError> {
    let spec = settings.sigma_spec();
    let weight = generate_weight(&spec)?;
    let body = GenBody {
        densities: weight.to_row_major(),
        total_mass: weight.total_mass(),
        spec,
    };
    to_body(&body)
}

pub fn execute(settings: &Settings) -> Result<serde_json::Value, LabError> {
    match settings.command {
        CommandKind::Constants => constants(settings),
        CommandKind::Norm => norm(settings),
        CommandKind::Verify => verify(settings),
        CommandKind::Search => search(settings),
        CommandKind::Gen => gen(settings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CommandKind, Overrides, Settings};

    fn settings(command: CommandKind) -> Settings {
        let flags = Overrides {
            p: Some(2.0),
            delta: Some(1.0),
            seed: Some(7),
            ..Overrides::default()
        };
        Settings::merge(command, None, flags, None).unwrap()
    }

    #[test]
    fn constants_on_unit_weights_report_unit_bumps() {
        let body = execute(&settings(CommandKind::Constants)).unwrap();
        assert_eq!(body["joint_bump"]["value"], 1.0);
        assert_eq!(body["product_bump"]["value"], 1.0);
        assert_eq!(body["entropy_sigma"], 1.0);
    }

    #[test]
    fn verify_requires_a_target() {
        let err = execute(&settings(CommandKind::Verify)).unwrap_err();
        assert!(format!("{err}").contains("`target`"));
    }

    #[test]
    fn gen_reports_row_major_densities() {
        let mut s = settings(CommandKind::Gen);
        s.sigma = entropylab_core::WeightKind::Spike { leaf: 0, mass: 1.0 };
        s.depth = 3;
        let body = execute(&s).unwrap();
        assert_eq!(body["densities"][0], 8.0);
        assert_eq!(body["total_mass"], 1.0);
    }

    #[test]
    fn norm_missing_seed_names_the_field() {
        let flags = Overrides {
            p: Some(2.0),
            ..Overrides::default()
        };
        let s = Settings::merge(CommandKind::Norm, None, flags, None).unwrap();
        let err = execute(&s).unwrap_err();
        assert!(format!("{err}").contains("`seed`"));
    }
}
