"""Multi-objective molecular optimization driver.

Each generation draws a noising depth per parent, corrupts the parent
latent that far, denoises it back under the configured guidance (the
mutation operator), decodes and evaluates offspring, and selects survivors
with reference-point niching under constrained dominance. Parents compete
with offspring (mu + lambda).

Determinism: every random draw flows from named substreams keyed by
(seed, purpose, generation, parent, offspring), so results are independent
of batching and iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..chem.fingerprints import morgan_fingerprint, tanimoto
from ..chem.mol import Molecule
from ..chem.patterns import PatternGraph, parse_pattern, substructure_match
from ..chem.smiles import parse_smiles, write_smiles
from ..diffusion.conditioning import Condition
from ..diffusion.schedule import forward_diffuse
from ..errors import ContractError, ParseError
from ..guidance import GuidanceSpec, denoise_from, make_property_loss
from ..normalization import normalize_loge, normalize_wavelength
from ..prediction.oracle import fingerprint_features
from ..rng import substream
from ..tensor import Tensor
from .fragments import fragment_mutate, sa_proxy
from .nsga3 import das_dennis_points, nsga3_select
from .pareto import hypervolume, nondominated_sort, success_rate

GLOBAL_OBJECTIVES = ("emi_nm", "stokes", "loge", "plqy")
ADMET_OBJECTIVES = ("lipophilicity", "solubility", "pampa")


@dataclass
class Individual:
    latent: np.ndarray
    smiles: str | None
    molecule: Molecule | None
    objectives: np.ndarray | None        # normalized, maximization
    raw_objectives: np.ndarray | None    # reporting units
    constraints: list[tuple[str, bool, float]] = field(default_factory=list)
    parent: int = -1
    generation: int = 0

    @property
    def valid(self) -> bool:
        return self.molecule is not None

    @property
    def violations(self) -> int:
        base = 0 if self.valid else 1
        return base + sum(1 for _, ok, _ in self.constraints if not ok)

    @property
    def feasible(self) -> bool:
        return self.violations == 0


@dataclass
class OptimizationConfig:
    mode: str = "global"                    # global | fragment | admet
    n_steps: int = 30
    n_pops: int = 128
    n_offs: int = 8
    t_opt_min: int = 140
    t_opt_max: int = 160
    start_smiles: str = "CCc1ccc(Nc2ccc3ccccc3n2)cc1"
    solvent_smiles: str = "CCO"
    guidance: GuidanceSpec = field(default_factory=lambda: GuidanceSpec(kind="none"))
    tanimoto_min: float | None = None
    sa_max: float | None = None
    substructure: str | None = None
    property_floor_multipliers: dict = field(default_factory=dict)  # admet fluorescence floors
    core_smiles: str | None = None          # fragment mode
    core_anchors: list[int] = field(default_factory=list)
    beam_size: int = 1
    seed: int = 0

    def validate(self, t_max: int):
        if self.n_pops < 1 or self.n_offs < 1:
            raise ContractError("population and offspring counts must be >= 1")
        if not (0 <= self.t_opt_min <= self.t_opt_max):
            raise ContractError("need 0 <= t_opt_min <= t_opt_max")
        if self.t_opt_max >= t_max:
            raise ContractError(f"t_opt_max {self.t_opt_max} must stay below T={t_max}")
        if self.mode not in ("global", "fragment", "admet"):
            raise ContractError(f"unknown optimization mode {self.mode!r}")
        if self.mode == "fragment" and (self.core_smiles is None or not self.core_anchors):
            raise ContractError("fragment mode needs core_smiles and core_anchors")


class SyntheticAdmetOracle:
    """Pluggable stand-in scoring permeability-style objectives in [0, 1]."""

    def __init__(self, seed: int = 0):
        rng = substream(seed, "admet-oracle")
        self.weights = rng.normal(0.0, 1.3, (3, 8))
        self.bias = rng.normal(0.0, 0.4, 3)

    def __call__(self, mol: Molecule) -> np.ndarray:
        f = fingerprint_features(mol) - 0.5
        return 1.0 / (1.0 + np.exp(-(self.weights @ f + self.bias)))


def lsp_objective_evaluator(lsp, solvent: Molecule):
    """Batched (normalized, raw) global-mode objectives from latent predictions."""

    def evaluate(latents: np.ndarray, molecules):
        props = lsp.predict_latent(Tensor(latents), [solvent] * latents.shape[0]).data
        return objectives_from_normalized_props(props)

    return evaluate


def objectives_from_normalized_props(props_n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(emi, stokes, loge, plqy) objective rows from normalized property rows."""
    abs_n, emi_n, loge_n, plqy = props_n[:, 0], props_n[:, 1], props_n[:, 2], props_n[:, 3]
    normalized = np.stack([emi_n, emi_n - abs_n, loge_n, plqy], axis=1)
    raw = np.stack([emi_n * 900 + 200, (emi_n - abs_n) * 900, loge_n * 8 + 0.5, plqy], axis=1)
    return normalized, raw


def normalize_objective_rows(names, raw: np.ndarray) -> np.ndarray:
    """Min-max maps for reporting-unit objective rows (identity for [0,1] scores)."""
    cols = []
    for j, name in enumerate(names):
        col = raw[:, j]
        if name in ("emi_nm", "abs_nm"):
            cols.append(normalize_wavelength(col))
        elif name == "stokes":
            cols.append(col / 900.0)
        elif name == "loge":
            cols.append(normalize_loge(col))
        else:
            cols.append(np.asarray(col, dtype=np.float64))
    return np.stack(cols, axis=1)


@dataclass
class ModelBundle:
    autoencoder: object
    dit: object
    schedule: object
    lsp: object = None
    agp: object = None
    admet_oracle: object = None
    sa_scorer: object = None
    evaluator: object = None   # overrides the mode default when set
    guidance_loss: object = None


def mutate(parent_latent: np.ndarray, t_opt: int, bundle: ModelBundle, spec: GuidanceSpec,
           loss_fn, n_offs: int, rngs) -> np.ndarray:
    """Noise the parent t_opt steps and denoise back; (n_offs, P, h) offspring.

    t_opt = 0 copies the parent; t_opt = T draws fresh noise (pure de novo).
    """
    schedule = bundle.schedule
    shape = parent_latent.shape
    if t_opt == 0:
        return np.repeat(parent_latent[None], n_offs, axis=0)
    if t_opt == schedule.t_max:
        x_start = np.stack([r.standard_normal(shape) for r in rngs])
    else:
        eps = np.stack([r.standard_normal(shape) for r in rngs])
        x_start = forward_diffuse(np.repeat(parent_latent[None], n_offs, axis=0), t_opt, eps, schedule)
    return denoise_from(bundle.dit, schedule, Condition.unconditional(), spec, loss_fn,
                        x_start, t_opt, rngs)


def _decode(bundle: ModelBundle, latent: np.ndarray, beam_size: int):
    smiles, _, completed = bundle.autoencoder.decode_beam(latent, beam_size=beam_size)
    if not completed or not smiles:
        return None, smiles
    try:
        return parse_smiles(smiles), smiles
    except ParseError:
        return None, smiles


def run_optimization(config: OptimizationConfig, bundle: ModelBundle) -> dict:
    """Drive the evolutionary loop; returns trajectory, final population,
    Pareto front, and report ingredients."""
    config.validate(bundle.schedule.t_max)
    seed = config.seed
    start_mol = parse_smiles(config.start_smiles)
    solvent = parse_smiles(config.solvent_smiles)

    if config.mode == "fragment":
        core = parse_smiles(config.core_smiles) if config.core_smiles else None
        objective_names = GLOBAL_OBJECTIVES
    elif config.mode == "admet":
        core = None
        objective_names = ADMET_OBJECTIVES
    else:
        core = None
        objective_names = GLOBAL_OBJECTIVES
    m = len(objective_names)

    evaluator = bundle.evaluator
    if evaluator is None:
        if config.mode == "admet":
            oracle = bundle.admet_oracle or SyntheticAdmetOracle(seed)
            def evaluator(latents, molecules):
                raw = np.stack([
                    oracle(mol) if mol is not None else np.zeros(m) for mol in molecules
                ])
                return raw.copy(), raw
        else:
            if bundle.lsp is None:
                raise ContractError(f"{config.mode} mode needs an LSP in the bundle")
            evaluator = lsp_objective_evaluator(bundle.lsp, solvent)

    loss_fn = bundle.guidance_loss
    if loss_fn is None and config.guidance.kind in ("denovo", "global", "admet"):
        if bundle.lsp is None:
            raise ContractError("property-guided modes need an LSP")
        loss_fn = make_property_loss(config.guidance, bundle.lsp, solvent)

    sa_scorer = bundle.sa_scorer or sa_proxy
    pattern: PatternGraph | None = parse_pattern(config.substructure) if config.substructure else None
    start_fp = morgan_fingerprint(start_mol)

    # mutate the fragment latent in fragment mode, the whole molecule otherwise
    seed_mol = start_mol
    start_latent = bundle.autoencoder.encode(seed_mol)

    def constrain(ind: Individual, fluor_raw: np.ndarray | None):
        if not ind.valid:
            return
        mol = ind.molecule
        if config.tanimoto_min is not None:
            sim = tanimoto(morgan_fingerprint(mol), start_fp)
            ind.constraints.append(("tanimoto", sim > config.tanimoto_min, sim))
        if config.sa_max is not None:
            sa = sa_scorer(mol)
            ind.constraints.append(("sa", sa < config.sa_max, sa))
        if pattern is not None:
            found, _ = substructure_match(mol, pattern)
            ind.constraints.append(("substructure", found, 1.0 if found else 0.0))
        if floors and fluor_raw is not None:
            fluor = dict(zip(GLOBAL_OBJECTIVES, fluor_raw))
            for name, floor in floors.items():
                v = float(fluor[name])
                ind.constraints.append((f"floor_{name}", v > floor, v))

    def build_individuals(latents, gen, parent_idx):
        molecules, smiles_list = [], []
        for x in latents:
            if config.mode == "fragment":
                frag_mol, frag_smiles = _decode(bundle, x, config.beam_size)
                if frag_mol is None:
                    molecules.append(None)
                    smiles_list.append(frag_smiles)
                    continue
                assemblies = fragment_mutate(core, config.core_anchors, frag_mol)
                if not assemblies:
                    molecules.append(None)
                    smiles_list.append(frag_smiles)
                    continue
                best = _best_assembly(assemblies, bundle, solvent)
                molecules.append(best)
                smiles_list.append(write_smiles(best))
            else:
                mol, smi = _decode(bundle, x, config.beam_size)
                molecules.append(mol)
                smiles_list.append(smi)
        normalized, raw = evaluator(latents, molecules)
        fluor_rows = None
        if floors:
            # fluorescence floors always come from the latent predictor,
            # whatever the optimization objectives are
            props_n = bundle.lsp.predict_latent(Tensor(np.asarray(latents)), [solvent] * len(latents)).data
            _, fluor_rows = objectives_from_normalized_props(props_n)
        out = []
        for i, x in enumerate(latents):
            ind = Individual(
                latent=np.array(x), smiles=smiles_list[i], molecule=molecules[i],
                objectives=normalized[i] if molecules[i] is not None else None,
                raw_objectives=raw[i] if molecules[i] is not None else None,
                parent=parent_idx[i], generation=gen,
            )
            constrain(ind, fluor_rows[i] if fluor_rows is not None else None)
            out.append(ind)
        return out

    # fluorescence floors for admet mode come from the start molecule's prediction
    floors: dict[str, float] = {}
    if config.property_floor_multipliers:
        if bundle.lsp is None:
            raise ContractError("property floors need an LSP")
        base_n = bundle.lsp.predict_latent(Tensor(start_latent[None]), [solvent]).data
        _, base_raw = objectives_from_normalized_props(base_n)
        base_map = dict(zip(GLOBAL_OBJECTIVES, base_raw[0]))
        for name, mult in config.property_floor_multipliers.items():
            floors[name] = float(mult) * float(base_map[name])

    start_ind = build_individuals(start_latent[None], 0, [-1])[0]
    if not start_ind.feasible:
        import logging
        logging.getLogger(__name__).warning(
            "starting molecule violates constraints: %s", start_ind.constraints)
    population = [start_ind] * config.n_pops

    h_div = 1
    while math.comb(h_div + m - 1, m - 1) < config.n_pops:
        h_div += 1
    refs = das_dennis_points(m, h_div)

    trajectory: list[dict] = []
    seen_molecules: set[str] = set()
    if start_ind.valid:
        seen_molecules.add(write_smiles(start_ind.molecule))

    for step in range(1, config.n_steps + 1):
        t_rng = substream(seed, "topt", step)
        t_opts = [int(t_rng.integers(config.t_opt_min, config.t_opt_max + 1))
                  for _ in range(len(population))]
        offspring: list[Individual] = []
        # group parents sharing a noising depth into one denoise batch
        for t_opt in sorted(set(t_opts)):
            parent_ids = [pi for pi, t in enumerate(t_opts) if t == t_opt]
            rngs, starts, owners = [], [], []
            for pi in parent_ids:
                chain_rngs = [substream(seed, "mutate", step, pi, oi) for oi in range(config.n_offs)]
                parent_latent = population[pi].latent
                for oi, r in enumerate(chain_rngs):
                    if t_opt == 0:
                        starts.append(np.array(parent_latent))
                    elif t_opt == bundle.schedule.t_max:
                        starts.append(r.standard_normal(parent_latent.shape))
                    else:
                        eps = r.standard_normal(parent_latent.shape)
                        starts.append(forward_diffuse(parent_latent, t_opt, eps, bundle.schedule))
                    rngs.append(r)
                    owners.append(pi)
            x_start = np.stack(starts)
            latents = denoise_from(bundle.dit, bundle.schedule, Condition.unconditional(),
                                   config.guidance, loss_fn, x_start, t_opt, rngs)
            offspring.extend(build_individuals(latents, step, owners))

        for ind in offspring:
            if ind.valid and ind.feasible:
                seen_molecules.add(write_smiles(ind.molecule))

        pool = population + offspring
        matrix = np.stack([
            ind.objectives if ind.objectives is not None else np.full(m, -1e9) for ind in pool
        ])
        violations = np.array([ind.violations for ind in pool])
        survivors = nsga3_select(matrix, config.n_pops, refs,
                                 substream(seed, "select", step), violations)
        population = [pool[i] for i in survivors]
        trajectory.extend(_stats_rows(step, objective_names, population))

    feasible = [ind for ind in population if ind.feasible and ind.objectives is not None]
    if feasible:
        fronts = nondominated_sort(np.stack([ind.objectives for ind in feasible]))
        pareto = [feasible[i] for i in fronts[0]] if fronts else []
    else:
        pareto = []
    return {
        "objective_names": list(objective_names),
        "trajectory": trajectory,
        "population": population,
        "pareto": pareto,
        "start": start_ind,
        "n_mols": len(seen_molecules),
        "config": config,
    }


def _best_assembly(assemblies, bundle: ModelBundle, solvent) -> Molecule:
    if bundle.agp is None:
        return assemblies[0]
    preds, _ = bundle.agp.predict_batch(assemblies, [solvent] * len(assemblies))
    # rank by the summed normalized objectives of the assembled molecule
    normalized, _ = objectives_from_normalized_props(preds.data)
    return assemblies[int(np.argmax(normalized.sum(axis=1)))]


def _stats_rows(step: int, names, population) -> list[dict]:
    rows = []
    values = [ind.raw_objectives for ind in population if ind.feasible and ind.raw_objectives is not None]
    if not values:
        return [{"step": step, "objective": n, "mean": None, "q25": None, "q75": None} for n in names]
    arr = np.stack(values)
    for j, name in enumerate(names):
        col = arr[:, j]
        rows.append({
            "step": step, "objective": name,
            "mean": float(col.mean()),
            "q25": float(np.quantile(col, 0.25)),
            "q75": float(np.quantile(col, 0.75)),
        })
    return rows


def optimization_report(result: dict, physics_evaluator=None) -> dict:
    """Consolidated metrics mirroring the optimization report schema."""
    names = result["objective_names"]
    pareto = result["pareto"]
    start = result["start"]
    report = {"objectives": names, "n_mols": result["n_mols"]}
    if pareto:
        raw = np.stack([ind.raw_objectives for ind in pareto])
        normalized = np.stack([ind.objectives for ind in pareto])
        report["hv"] = hypervolume(normalized, np.zeros(len(names)))
        report["max"] = {n: float(raw[:, j].max()) for j, n in enumerate(names)}
    else:
        report["hv"] = 0.0
        report["max"] = {n: None for n in names}
    finals = [ind for ind in result["population"] if ind.feasible and ind.objectives is not None]
    if finals and start.objectives is not None:
        mat = np.stack([ind.objectives for ind in finals])
        report["success_rate_nn"] = success_rate(mat, start.objectives)
    else:
        report["success_rate_nn"] = 0.0
    if physics_evaluator is not None and finals and start.molecule is not None:
        phys = np.stack([physics_evaluator(ind.molecule) for ind in finals])
        phys_start = physics_evaluator(start.molecule)
        report["success_rate_hybrid"] = success_rate(phys, phys_start)
    else:
        report["success_rate_hybrid"] = None
    return report
