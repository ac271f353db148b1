use super::expr::LinExpr;
use super::SdpProblem;
use crate::error::{Error, Result};
use crate::network::{DgCost, FeederModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Total series loss `Σ Re tr(z ℓ)`.
    LossMin,
    /// Grid purchase plus convex generator costs ($/h).
    CostMin,
    /// Grid purchase plus flat generator/storage prices, linear ($/h).
    SupplyCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Overrides the model's source price ($/kWh).
    pub grid_price: Option<f64>,
}

impl ObjectiveSpec {
    pub fn loss_min() -> Self {
        ObjectiveSpec { kind: ObjectiveKind::LossMin, grid_price: None }
    }

    pub fn cost_min() -> Self {
        ObjectiveSpec { kind: ObjectiveKind::CostMin, grid_price: None }
    }

    pub fn supply_cost() -> Self {
        ObjectiveSpec { kind: ObjectiveKind::SupplyCost, grid_price: None }
    }
}

/// Mean per-phase series resistance (p.u.) below which a branch's `ℓ`
/// block is regularized.
pub const WEAK_BRANCH_R: f64 = 1e-3;

/// Sets the problem objective.
///
/// Zero-impedance branches (ideal regulators, switches) leave `ℓ` bounded
/// only by its PSD block, and nearly lossless ones (very short segments)
/// barely constrain it. A small `tr(ℓ)` term on those branches pins `ℓ` to
/// the rank-one value without touching any physical variable. That term is
/// tracked in `sdp.regularization`.
pub fn build_objective(
    sdp: &mut SdpProblem,
    model: &FeederModel,
    spec: &ObjectiveSpec,
    zero_impedance_weight: Option<f64>,
) -> Result<()> {
    let base = model.phase_base_kva();
    let price = spec.grid_price.unwrap_or(model.source.grid_price);
    if !price.is_finite() {
        return Err(Error::Objective("grid price must be finite".into()));
    }
    let mut obj = LinExpr::zero();
    match spec.kind {
        ObjectiveKind::LossMin => {
            for (b, bv) in sdp.branches.iter().enumerate() {
                obj += &bv.l_phase.mul_left(&sdp.topology.branches[b].z).trace();
            }
        }
        ObjectiveKind::CostMin | ObjectiveKind::SupplyCost => {
            for e in sdp.source_injection.expr().entries() {
                obj += &e.scaled_real(price * base);
            }
            for gv in sdp.generators.clone() {
                let gen = &model.generators[gv.gen];
                let total = gv.total_p();
                match gen.cost {
                    DgCost::Quadratic { a1, a2 } => {
                        if a2 < 0.0 {
                            return Err(Error::Objective(format!(
                                "generator `{}` has a concave cost (a2 < 0)",
                                gen.id
                            )));
                        }
                        if a2 > 0.0 && spec.kind == ObjectiveKind::SupplyCost {
                            return Err(Error::Objective(format!(
                                "supply-cost objective is linear; generator `{}` has a2 > 0",
                                gen.id
                            )));
                        }
                        obj += &total.scaled_real(a1 * base);
                        if a2 > 0.0 {
                            // t ≥ y² as ‖(2y, t − 1)‖ ≤ t + 1.
                            let t = sdp.problem.real_var(format!("t:{}", gen.id)).scalar();
                            let one = LinExpr::real(1.0);
                            sdp.problem.add_soc(
                                format!("cost {}", gen.id),
                                vec![&t + &one, total.scaled_real(2.0), &t - &one],
                            );
                            obj += &t.scaled_real(a2 * base * base);
                        }
                    }
                    DgCost::Flat { price } => {
                        let dir = gen.flat_direction().ok_or_else(|| {
                            Error::Objective(format!(
                                "flat-priced generator `{}` must dispatch in one direction",
                                gen.id
                            ))
                        })?;
                        obj += &total.scaled_real(price * base * dir);
                    }
                }
            }
        }
    }

    let weight = zero_impedance_weight.unwrap_or(match spec.kind {
        ObjectiveKind::LossMin => 1e-2,
        _ => 1e-2 * price.abs().max(1e-3) * base,
    });
    let mut reg = LinExpr::zero();
    for (b, br) in sdp.topology.branches.iter().enumerate() {
        let n = br.z.nrows().max(1) as f64;
        let mean_r = br.z.diagonal().iter().map(|z| z.re).sum::<f64>() / n;
        if br.has_zero_impedance() || mean_r < WEAK_BRANCH_R {
            reg += &sdp.branches[b].l_phase.trace().scaled_real(weight);
        }
    }
    let reg = reg.real_part();
    obj += &reg;
    sdp.regularization = reg;
    sdp.problem.objective = LinExpr::zero();
    sdp.problem.add_objective(&obj.compacted());
    Ok(())
}
