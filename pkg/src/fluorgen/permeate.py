"""Membrane permeability post-processing from ingested umbrella-sampling data.

Per-window position series give an autocorrelation time and a local
diffusion coefficient D = Var(z)/tau; the symmetrized free-energy profile
and D(z) combine into a resistance profile R(z) = exp(dG/RT)/D(z) whose
integral (doubled for the two leaflets) is the inverse effective
permeability. Free energies are molar (kJ/mol), so the gas constant in
kJ/(mol K) plays the Boltzmann factor's role.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataError

R_GAS_KJ_PER_MOL_K = 0.0083145
DEFAULT_TEMPERATURE_K = 310.0

NM2_PER_PS_TO_CM2_PER_S = 1e-2   # 1 nm^2/ps = 1e-14 cm^2 / 1e-12 s
NM_PER_PS_TO_CM_PER_S = 1e5      # 1 nm/ps  = 1e-7 cm / 1e-12 s

FIT_CUTOFF = np.exp(-2.0)


@dataclass
class WindowSeries:
    center_nm: float
    dt_ps: float
    z_nm: np.ndarray

    def __post_init__(self):
        self.z_nm = np.asarray(self.z_nm, dtype=np.float64)
        if self.z_nm.size < 100:
            raise ContractError(f"window at {self.center_nm} nm has {self.z_nm.size} samples; need >= 100")
        if not np.all(np.isfinite(self.z_nm)):
            raise ContractError("window series contains non-finite samples")
        if self.dt_ps <= 0:
            raise ContractError("time step must be positive")


@dataclass
class PMFProfile:
    z_nm: np.ndarray
    dg_kj_mol: np.ndarray

    def __post_init__(self):
        self.z_nm = np.asarray(self.z_nm, dtype=np.float64)
        self.dg_kj_mol = np.asarray(self.dg_kj_mol, dtype=np.float64)
        if self.z_nm.ndim != 1 or self.z_nm.shape != self.dg_kj_mol.shape:
            raise ContractError("grid and free energy must be matching vectors")
        if np.any(np.diff(self.z_nm) <= 0):
            raise ContractError("grid must be strictly ascending")
        if not np.all(np.isfinite(self.dg_kj_mol)):
            raise ContractError("free energy contains non-finite values")


def autocorrelation(z: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation C(0..max_lag) of a centered series."""
    z = z - z.mean()
    var = float(z @ z) / z.size
    if var <= 0:
        raise ContractError("series has zero variance")
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        out[lag] = float(z[: z.size - lag] @ z[lag:]) / (z.size * var)
    return out


def fit_tau(series: WindowSeries) -> float:
    """Autocorrelation time (ps) from a log-linear fit of the decay.

    Lags with C(t) > exp(-2) enter the fit; a non-positive lag-1
    autocorrelation means the series is too noisy to fit.
    """
    max_lag = min(series.z_nm.size - 2, 5000)
    c = autocorrelation(series.z_nm, max_lag)
    if c[1] <= 0:
        raise DataError(f"window at {series.center_nm} nm: lag-1 autocorrelation "
                        f"{c[1]:.3f} <= 0; series too noisy or too short")
    lags = [0]
    for lag in range(1, max_lag + 1):
        if c[lag] <= FIT_CUTOFF or c[lag] <= 0:
            break
        lags.append(lag)
    if len(lags) < 2:
        raise DataError(f"window at {series.center_nm} nm: no usable lags above the fit cutoff")
    t = np.array(lags[1:], dtype=np.float64) * series.dt_ps
    y = np.log(c[lags[1:]])
    # least squares through the origin: ln C = -t / tau
    slope = float(t @ y) / float(t @ t)
    if slope >= 0:
        raise DataError(f"window at {series.center_nm} nm: non-decaying autocorrelation")
    return -1.0 / slope


def diffusion_coefficient(series: WindowSeries) -> dict:
    """D = Var(z)/tau in nm^2/ps, with the cm^2/s conversion included."""
    tau = fit_tau(series)
    var = float(np.var(series.z_nm))
    d = var / tau
    return {
        "center_nm": series.center_nm,
        "tau_ps": tau,
        "var_nm2": var,
        "d_nm2_per_ps": d,
        "d_cm2_per_s": d * NM2_PER_PS_TO_CM2_PER_S,
    }


def symmetrize_pmf(profile: PMFProfile) -> PMFProfile:
    """Average the two leaflets and shift the bulk endpoint to zero.

    Two-sided input (grid spanning negative z) averages dG(z) with dG(-z)
    on the non-negative half; one-sided input only gets the bulk shift.
    """
    z, dg = profile.z_nm, profile.dg_kj_mol
    if z[0] < 0:
        half = z[z >= 0]
        if half.size == 0:
            raise ContractError("grid must reach z >= 0")
        mirrored = np.interp(-half, z, dg)
        direct = np.interp(half, z, dg)
        sym = 0.5 * (direct + mirrored)
        out = PMFProfile(half, sym)
    else:
        out = PMFProfile(z.copy(), dg.copy())
    out.dg_kj_mol = out.dg_kj_mol - out.dg_kj_mol[-1]
    return out


def permeability(pmf: PMFProfile, d_centers_nm, d_values_nm2_ps, temperature_k: float = DEFAULT_TEMPERATURE_K) -> dict:
    """Resistance profile and effective permeability.

    D(z) samples are interpolated linearly onto the PMF grid;
    R(z) = exp(dG/RT)/D(z), R_eff = 2 * trapezoid(R, z), P_eff = 1/R_eff
    reported as log10 in cm/s.
    """
    d_centers = np.asarray(d_centers_nm, dtype=np.float64)
    d_values = np.asarray(d_values_nm2_ps, dtype=np.float64)
    if d_centers.shape != d_values.shape or d_centers.ndim != 1 or d_centers.size < 1:
        raise ContractError("diffusion samples must be matching vectors")
    if np.any(d_values <= 0):
        raise ContractError("diffusion coefficients must be positive everywhere")
    d_on_grid = np.interp(pmf.z_nm, d_centers, d_values)
    rt = R_GAS_KJ_PER_MOL_K * temperature_k
    resistance = np.exp(pmf.dg_kj_mol / rt) / d_on_grid        # ps/nm^2
    r_eff = 2.0 * float(np.trapezoid(resistance, pmf.z_nm))    # ps/nm
    p_eff_nm_ps = 1.0 / r_eff
    p_eff_cm_s = p_eff_nm_ps * NM_PER_PS_TO_CM_PER_S
    return {
        "z_nm": pmf.z_nm.tolist(),
        "resistance_ps_per_nm2": resistance.tolist(),
        "d_nm2_per_ps": d_on_grid.tolist(),
        "r_eff_ps_per_nm": r_eff,
        "p_eff_cm_per_s": p_eff_cm_s,
        "log10_p_eff_cm_per_s": float(np.log10(p_eff_cm_s)),
        "constants": {
            "temperature_k": temperature_k,
            "r_gas_kj_per_mol_k": R_GAS_KJ_PER_MOL_K,
            "nm2_per_ps_to_cm2_per_s": NM2_PER_PS_TO_CM2_PER_S,
            "nm_per_ps_to_cm_per_s": NM_PER_PS_TO_CM_PER_S,
        },
    }


# ---------------------------------------------------------------------------
# file ingestion: pmf.csv (z_nm, dG_kJmol) and windows/*.csv (t_ps, z_nm)

def read_pmf_csv(path) -> PMFProfile:
    z, dg = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["z_nm", "dG_kJmol"]:
            raise DataError(f"{path}: header must be 'z_nm,dG_kJmol'")
        for row_i, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                z.append(float(row[0]))
                dg.append(float(row[1]))
            except (ValueError, IndexError):
                raise DataError(f"{path}: bad row {row_i}: {row!r}") from None
    if not z:
        raise DataError(f"{path}: no data rows")
    try:
        return PMFProfile(np.array(z), np.array(dg))
    except ContractError as exc:
        raise DataError(f"{path}: {exc}") from exc


def read_window_csv(path, center_nm: float) -> WindowSeries:
    t, z = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_ps", "z_nm"]:
            raise DataError(f"{path}: header must be 't_ps,z_nm'")
        for row in reader:
            if not row:
                continue
            t.append(float(row[0]))
            z.append(float(row[1]))
    if len(t) < 2:
        raise DataError(f"{path}: need at least two samples")
    dt = t[1] - t[0]
    try:
        return WindowSeries(center_nm, dt, np.array(z))
    except ContractError as exc:
        raise DataError(f"{path}: {exc}") from exc


def permeability_from_run_dir(input_dir, temperature_k: float = DEFAULT_TEMPERATURE_K) -> dict:
    """Full pipeline over a directory holding pmf.csv and windows/<z>.csv files.

    Window filenames carry the window center in nm, e.g. windows/0.45.csv.
    """
    pmf_path = os.path.join(input_dir, "pmf.csv")
    windows_dir = os.path.join(input_dir, "windows")
    if not os.path.exists(pmf_path):
        raise DataError(f"missing {pmf_path}")
    if not os.path.isdir(windows_dir):
        raise DataError(f"missing {windows_dir}/")
    pmf = symmetrize_pmf(read_pmf_csv(pmf_path))
    windows = []
    for name in sorted(os.listdir(windows_dir)):
        if not name.endswith(".csv"):
            continue
        try:
            center = float(name[: -len(".csv")])
        except ValueError:
            raise DataError(f"window filename {name!r} must be '<center_nm>.csv'") from None
        windows.append(read_window_csv(os.path.join(windows_dir, name), center))
    if not windows:
        raise DataError(f"no window CSVs in {windows_dir}/")
    fits = [diffusion_coefficient(w) for w in sorted(windows, key=lambda w: w.center_nm)]
    centers = [f["center_nm"] for f in fits]
    values = [f["d_nm2_per_ps"] for f in fits]
    result = permeability(pmf, centers, values, temperature_k)
    result["windows"] = fits
    return result
