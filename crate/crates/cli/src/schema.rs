//! Printable contracts for every emitted artifact. Stable across patch
//! versions; the integration tests parse emitted files back against this
//! text.

pub const SCHEMA: &str = r#"artifact contracts
==================

Exit codes: 0 all selected checks pass, 1 a numerical check failed,
2 usage or configuration error.

Per selected study, the run writes <study>.csv and <study>.json into the
output directory, plus one shared summary.txt with a PASS/FAIL line per
study. Floats are printed as `{:.17e}`, so identical configurations and
seeds produce byte-identical artifacts.

validate.csv
  columns: item,j,l,value
  rows: normal_defect per coupling j; commutator_defect per pair (j,l);
        joint_kernel_margin (smallest stacked singular value).
validate.json: the full report (normal_defects, commutator_defects,
  joint_kernel_margin, verdict).

spectrum.csv
  columns: index,free_eigenvalue,full_eigenvalue  (both sorted ascending)
spectrum.json: dimension, hermiticity_defect, setsum_defect (sorted free
  spectrum against the set-sum of level and field energies), and the
  spectral ranges.

resolvent-check.csv
  columns: z_re,z_im,rel_error,invertibility_margin
  rel_error: operator-norm gap between the block-formula resolvent and the
  dense inverse, relative; margin: smallest singular value of M(z) - T.
resolvent-check.json: max_rel_error, apply_defect, tolerance, points.

converge.csv
  columns: lambda,z_re,z_im,h_minus1_dist,resolvent_dist,sandwich_dist
  lambda: cutoff; h_minus1_dist: weighted factor distance to the reference;
  resolvent_dist: ||R(H_n,z) - R(H_ref,z)||; sandwich_dist: regularizer gap.
converge.json: rungs, per-z ratio fits, verdict.

dress.csv
  columns: n_max,self_energy,unitarity_defect,conjugation_defect,spectral_shift,ground_energy
dress.json: one record per truncation rung.

vanish.csv
  columns: s,z_re,z_im,dist,norm_measured,norm_bound
  dist: distance of z to the free spectrum; norm_measured: largest singular
  value of R_z (H_free+1)^{s/2}; norm_bound: spectral envelope.
vanish.json: fitted decay exponent per s and the bound verdict.

grid tables (modes data):
  header `k w omega re_f im_f`, one node per line, same float format.

matrix exports:
  binary: u64 LE rows, u64 LE cols, then row-major (re, im) f64 LE pairs.
  text: `%%matrix array complex general`, a `rows cols` line, then one
  `re im` pair per line in column-major order.
"#;
