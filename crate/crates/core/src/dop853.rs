//! Single step of the Dormand–Prince 8(5,3) method for autonomous
//! four-dimensional systems, after the `DOP853` code of Hairer, Nørsett &
//! Wanner (Solving Ordinary Differential Equations I). Twelve stages per
//! attempted step, an extra first-same-as-last evaluation on acceptance,
//! and the combined 5th/3rd-order error estimate.

// The tableau is transcribed verbatim from the published coefficients.
#![allow(clippy::excessive_precision)]

use crate::error::Result;

pub const A21: f64 = 5.26001519587677318785587544488E-2;
pub const A31: f64 = 1.97250569845378994544595329183E-2;
pub const A32: f64 = 5.91751709536136983633785987549E-2;
pub const A41: f64 = 2.95875854768068491816892993775E-2;
pub const A43: f64 = 8.87627564304205475450678981324E-2;
pub const A51: f64 = 2.41365134159266685502369798665E-1;
pub const A53: f64 = -8.84549479328286085344864962717E-1;
pub const A54: f64 = 9.24834003261792003115737966543E-1;
pub const A61: f64 = 3.7037037037037037037037037037E-2;
pub const A64: f64 = 1.70828608729473871279604482173E-1;
pub const A65: f64 = 1.25467687566822425016691814123E-1;
pub const A71: f64 = 3.7109375E-2;
pub const A74: f64 = 1.70252211019544039314978060272E-1;
pub const A75: f64 = 6.02165389804559606850219397283E-2;
pub const A76: f64 = -1.7578125E-2;
pub const A81: f64 = 3.70920001185047927108779319836E-2;
pub const A84: f64 = 1.70383925712239993810214054705E-1;
pub const A85: f64 = 1.07262030446373284651809199168E-1;
pub const A86: f64 = -1.53194377486244017527936158236E-2;
pub const A87: f64 = 8.27378916381402288758473766002E-3;
pub const A91: f64 = 6.24110958716075717114429577812E-1;
pub const A94: f64 = -3.36089262944694129406857109825E0;
pub const A95: f64 = -8.68219346841726006818189891453E-1;
pub const A96: f64 = 2.75920996994467083049415600797E1;
pub const A97: f64 = 2.01540675504778934086186788979E1;
pub const A98: f64 = -4.34898841810699588477366255144E1;
pub const A101: f64 = 4.77662536438264365890433908527E-1;
pub const A104: f64 = -2.48811461997166764192642586468E0;
pub const A105: f64 = -5.90290826836842996371446475743E-1;
pub const A106: f64 = 2.12300514481811942347288949897E1;
pub const A107: f64 = 1.52792336328824235832596922938E1;
pub const A108: f64 = -3.32882109689848629194453265587E1;
pub const A109: f64 = -2.03312017085086261358222928593E-2;
pub const A111: f64 = -9.3714243008598732571704021658E-1;
pub const A114: f64 = 5.18637242884406370830023853209E0;
pub const A115: f64 = 1.09143734899672957818500254654E0;
pub const A116: f64 = -8.14978701074692612513997267357E0;
pub const A117: f64 = -1.85200656599969598641566180701E1;
pub const A118: f64 = 2.27394870993505042818970056734E1;
pub const A119: f64 = 2.49360555267965238987089396762E0;
pub const A1110: f64 = -3.0467644718982195003823669022E0;
pub const A121: f64 = 2.27331014751653820792359768449E0;
pub const A124: f64 = -1.05344954667372501984066689879E1;
pub const A125: f64 = -2.00087205822486249909675718444E0;
pub const A126: f64 = -1.79589318631187989172765950534E1;
pub const A127: f64 = 2.79488845294199600508499808837E1;
pub const A128: f64 = -2.85899827713502369474065508674E0;
pub const A129: f64 = -8.87285693353062954433549289258E0;
pub const A1210: f64 = 1.23605671757943030647266201528E1;
pub const A1211: f64 = 6.43392746015763530355970484046E-1;

pub const B1: f64 = 5.42937341165687622380535766363E-2;
pub const B6: f64 = 4.45031289275240888144113950566E0;
pub const B7: f64 = 1.89151789931450038304281599044E0;
pub const B8: f64 = -5.8012039600105847814672114227E0;
pub const B9: f64 = 3.1116436695781989440891606237E-1;
pub const B10: f64 = -1.52160949662516078556178806805E-1;
pub const B11: f64 = 2.01365400804030348374776537501E-1;
pub const B12: f64 = 4.47106157277725905176885569043E-2;

pub const BHH1: f64 = 0.244094488188976377952755905512E+00;
pub const BHH2: f64 = 0.733846688281611857341361741547E+00;
pub const BHH3: f64 = 0.220588235294117647058823529412E-01;

pub const ER1: f64 = 0.1312004499419488073250102996E-01;
pub const ER6: f64 = -0.1225156446376204440720569753E+01;
pub const ER7: f64 = -0.4957589496572501915214079952E+00;
pub const ER8: f64 = 0.1664377182454986536961530415E+01;
pub const ER9: f64 = -0.3503288487499736816886487290E+00;
pub const ER10: f64 = 0.3341791187130174790297318841E+00;
pub const ER11: f64 = 0.8192320648511571246570742613E-01;
pub const ER12: f64 = -0.2235530786388629525884427845E-01;

pub type State = [f64; 4];

fn axpy(z: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *z;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

pub struct StepResult {
    pub z_new: State,
    /// Normalized combined error estimate; accept when ≤ 1.
    pub err: f64,
}

/// One trial step of size `h` from `z`, with `k1 = f(z)` already known.
pub fn try_step<F>(
    f: &mut F,
    z: &State,
    k1: &State,
    h: f64,
    atol: f64,
    rtol: f64,
) -> Result<StepResult>
where
    F: FnMut(&State) -> Result<State>,
{
    let k2 = f(&axpy(z, h, &[(A21, k1)]))?;
    let k3 = f(&axpy(z, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(&axpy(z, h, &[(A41, k1), (A43, &k3)]))?;
    let k5 = f(&axpy(z, h, &[(A51, k1), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&axpy(z, h, &[(A61, k1), (A64, &k4), (A65, &k5)]))?;
    let k7 = f(&axpy(
        z,
        h,
        &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)],
    ))?;
    let k8 = f(&axpy(
        z,
        h,
        &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
    ))?;
    let k9 = f(&axpy(
        z,
        h,
        &[
            (A91, k1),
            (A94, &k4),
            (A95, &k5),
            (A96, &k6),
            (A97, &k7),
            (A98, &k8),
        ],
    ))?;
    let k10 = f(&axpy(
        z,
        h,
        &[
            (A101, k1),
            (A104, &k4),
            (A105, &k5),
            (A106, &k6),
            (A107, &k7),
            (A108, &k8),
            (A109, &k9),
        ],
    ))?;
    let k11 = f(&axpy(
        z,
        h,
        &[
            (A111, k1),
            (A114, &k4),
            (A115, &k5),
            (A116, &k6),
            (A117, &k7),
            (A118, &k8),
            (A119, &k9),
            (A1110, &k10),
        ],
    ))?;
    let k12 = f(&axpy(
        z,
        h,
        &[
            (A121, k1),
            (A124, &k4),
            (A125, &k5),
            (A126, &k6),
            (A127, &k7),
            (A128, &k8),
            (A129, &k9),
            (A1210, &k10),
            (A1211, &k11),
        ],
    ))?;

    let mut sum = [0.0; 4];
    let mut z_new = [0.0; 4];
    for i in 0..4 {
        sum[i] = B1 * k1[i]
            + B6 * k6[i]
            + B7 * k7[i]
            + B8 * k8[i]
            + B9 * k9[i]
            + B10 * k10[i]
            + B11 * k11[i]
            + B12 * k12[i];
        z_new[i] = z[i] + h * sum[i];
    }

    let mut err5 = 0.0;
    let mut err3 = 0.0;
    for i in 0..4 {
        let sk = atol + rtol * z[i].abs().max(z_new[i].abs());
        let e3 = sum[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err3 += (e3 / sk) * (e3 / sk);
        let e5 = ER1 * k1[i]
            + ER6 * k6[i]
            + ER7 * k7[i]
            + ER8 * k8[i]
            + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
        err5 += (e5 / sk) * (e5 / sk);
    }
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err5 * (1.0 / (4.0 * deno)).sqrt();

    Ok(StepResult { z_new, err })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 8th-order weights applied to the linear problem y' = y reproduce
    /// the Taylor series of exp up to h^8: a direct check that the tableau
    /// satisfies the linear order conditions.
    #[test]
    fn linear_stability_polynomial_matches_exp() {
        // Stage values for y' = y as polynomials in h, represented by
        // coefficient vectors; k_i(h) = 1 + Σ a_ij h k_j(h).
        fn poly_axpy(base: &[f64], terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
            let mut out = base.to_vec();
            for (c, p) in terms {
                for (j, &pj) in p.iter().enumerate() {
                    if j + 1 < out.len() {
                        out[j + 1] += c * pj;
                    }
                }
            }
            out
        }
        let n = 10;
        let one = {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v
        };
        let k1 = one.clone();
        let k2 = poly_axpy(&one, &[(A21, &k1)]);
        let k3 = poly_axpy(&one, &[(A31, &k1), (A32, &k2)]);
        let k4 = poly_axpy(&one, &[(A41, &k1), (A43, &k3)]);
        let k5 = poly_axpy(&one, &[(A51, &k1), (A53, &k3), (A54, &k4)]);
        let k6 = poly_axpy(&one, &[(A61, &k1), (A64, &k4), (A65, &k5)]);
        let k7 = poly_axpy(&one, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k8 = poly_axpy(
            &one,
            &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
        );
        let k9 = poly_axpy(
            &one,
            &[
                (A91, &k1),
                (A94, &k4),
                (A95, &k5),
                (A96, &k6),
                (A97, &k7),
                (A98, &k8),
            ],
        );
        let k10 = poly_axpy(
            &one,
            &[
                (A101, &k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        );
        let k11 = poly_axpy(
            &one,
            &[
                (A111, &k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        );
        let k12 = poly_axpy(
            &one,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        );
        // R(h) = 1 + h Σ b_i k_i(h).
        let mut r = vec![0.0; n + 1];
        r[0] = 1.0;
        for (b, k) in [
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ] {
            for (j, &kj) in k.iter().enumerate() {
                r[j + 1] += b * kj;
            }
        }
        let mut fact = 1.0;
        for (j, coeff) in r.iter().enumerate().take(9) {
            if j > 0 {
                fact *= j as f64;
            }
            assert!(
                (coeff - 1.0 / fact).abs() < 1e-12,
                "h^{j}: {coeff} vs {}",
                1.0 / fact
            );
        }
    }

    /// Harmonic oscillator in 4 variables as a smoke test of the stepper.
    #[test]
    fn single_step_accuracy_on_oscillator() {
        let mut f = |z: &State| -> crate::error::Result<State> { Ok([z[1], -z[0], z[3], -z[2]]) };
        let z0 = [1.0, 0.0, 0.0, 1.0];
        let k1 = f(&z0).unwrap();
        let h = 0.1;
        let step = try_step(&mut f, &z0, &k1, h, 1e-14, 1e-12).unwrap();
        let exact = [h.cos(), -h.sin(), h.sin(), h.cos()];
        for (got, want) in step.z_new.iter().zip(&exact) {
            assert!((got - want).abs() < 1e-14);
        }
    }
}
