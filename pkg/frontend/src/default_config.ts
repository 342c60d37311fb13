/** Generated by scripts/export_ui_fixtures.py; do not edit by hand. */

import type { ProjectConfig } from "./types.js";

export const DEFAULT_CONFIG: ProjectConfig = {
  "label": "config-3",
  "loop": {
    "demod": {
      "tau_s": 2.0457454354376332e-08,
      "type": "delay"
    },
    "discriminator": {
      "delta_nu_c_Hz": 45700.0,
      "detector": {
        "f_pd_Hz": 150000000.0,
        "nep_W_per_sqrtHz": 6.3e-12,
        "order": 3,
        "responsivity_A_per_W": 1.0,
        "transimpedance_V_per_A": 10000.0
      },
      "f_m_Hz": null,
      "k_e_override_V_per_Hz": 2.69e-06,
      "lp_order": 8,
      "modulation": {
        "beta_rad": 1.082,
        "omega_over_2pi_Hz": 20000000.0
      },
      "offset_V": 0.0,
      "p_pd_W": 0.00043
    },
    "f_i_slow_Hz": 37.0,
    "g_fast": {
      "factors": [
        {
          "k": 1.0,
          "type": "gain"
        },
        {
          "factors": [
            {
              "f0_Hz": 3230658.2585356943,
              "order": 1,
              "type": "lowpass_butterworth"
            },
            {
              "f0_Hz": 1587301.5371622185,
              "order": 1,
              "type": "lowpass_butterworth"
            }
          ],
          "type": "product"
        }
      ],
      "type": "product"
    },
    "g_slow": {
      "factors": [
        {
          "k": 10000000.0,
          "type": "gain"
        },
        {
          "f0_Hz": 6000.0,
          "order": 2,
          "type": "lowpass_butterworth"
        }
      ],
      "type": "product"
    },
    "k_fast": {
      "f_d_Hz": 1112957.083949387,
      "f_i_Hz": 20000.0,
      "k_p": 15979397.785152523,
      "parasitic_f0_Hz": 20000000.0
    },
    "label": "config-3",
    "pd": null,
    "tau_l_s": 3.9590580947028276e-08
  },
  "noise": {
    "f_low_Hz": 10.0,
    "h0_Hz2_per_Hz": 2000.0,
    "h_minus1_Hz2": 500000000.0,
    "s_n4_V2_per_Hz": 3.969000000000001e-15
  },
  "schema_version": 1,
  "traces": {}
};
