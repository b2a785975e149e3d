use crate::planner::{AgentParams, GAMMA_MAX, GAMMA_MIN, WEIGHT_MAX, WEIGHT_MIN};

/// Parameter box bounds in canonical array order
/// [gamma, p_mc, p_al, p_hys, p_do, p_co, p_v1, p_v2].
pub const BOX_LO: [f64; 8] = [GAMMA_MIN, WEIGHT_MIN, WEIGHT_MIN, WEIGHT_MIN, WEIGHT_MIN, WEIGHT_MIN, WEIGHT_MIN, WEIGHT_MIN];
pub const BOX_HI: [f64; 8] = [GAMMA_MAX, WEIGHT_MAX, WEIGHT_MAX, WEIGHT_MAX, WEIGHT_MAX, WEIGHT_MAX, WEIGHT_MAX, WEIGHT_MAX];

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Map an unconstrained optimizer-space vector into the parameter box via a
/// coordinate-wise scaled sigmoid. Always produces valid AgentParams.
pub fn decode_genome(z: &[f64]) -> AgentParams {
    debug_assert_eq!(z.len(), 8);
    let mut p = [0.0; 8];
    for i in 0..8 {
        p[i] = BOX_LO[i] + (BOX_HI[i] - BOX_LO[i]) * sigmoid(z[i]);
    }
    AgentParams::new_unchecked(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7])
}

/// Inverse of `decode_genome` (logit), clamped away from the box boundary so
/// boundary parameters map to large finite optimizer values.
pub fn encode_genome(params: &AgentParams) -> [f64; 8] {
    let p = params.to_array();
    let mut z = [0.0; 8];
    for i in 0..8 {
        let u = ((p[i] - BOX_LO[i]) / (BOX_HI[i] - BOX_LO[i])).clamp(1e-12, 1.0 - 1e-12);
        z[i] = (u / (1.0 - u)).ln();
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_always_in_box() {
        for z in [-50.0, -6.0, 0.0, 3.0, 80.0] {
            let p = decode_genome(&[z; 8]);
            assert!(p.validate().is_ok(), "z = {z} decoded out of box: {p:?}");
        }
    }

    #[test]
    fn center_maps_to_box_center() {
        let p = decode_genome(&[0.0; 8]);
        approx::assert_abs_diff_eq!(p.gamma, 0.8, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(p.p_mc, 5.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn roundtrip_interior(z in proptest::collection::vec(-6.0f64..6.0, 8)) {
            let p = decode_genome(&z);
            let z2 = encode_genome(&p);
            for (a, b) in z.iter().zip(&z2) {
                prop_assert!((a - b).abs() < 1e-9, "roundtrip {a} -> {b}");
            }
        }

        #[test]
        fn roundtrip_params_interior(idx in 0usize..8, frac in 0.001f64..0.999) {
            let mut arr = [0.8, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0];
            arr[idx] = BOX_LO[idx] + frac * (BOX_HI[idx] - BOX_LO[idx]);
            let p = AgentParams::from_array(&arr).unwrap();
            let back = decode_genome(&encode_genome(&p)).to_array();
            for (a, b) in arr.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
