"""Dataset ingestion, preprocessing, splits, DEGs, and synthetic data.

On-disk dataset format: UTF-8 CSV with header ``drug,dose,covariate,<gene
names...>``, one observation per row. The drug column holds a SMILES string
or the literal ``CONTROL`` (dose 0). A sidecar ``<path>.meta.json`` records
the preprocessing state, split assignments, and provenance.

The synthetic generator plants a linear ground truth (basal Gaussian latents,
fingerprint-linear drug responses, per-covariate latent offsets, a linear
decoder into log expression) and returns it alongside the dataset so tests
can check recovered structure against the truth.
"""

from __future__ import annotations

import copy
import csv
import json
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .smiles import fingerprint_smiles

CONTROL = "CONTROL"
SPLITS = ("train", "valid", "test")

__all__ = [
    "CONTROL",
    "DataError",
    "MalformedHeaderError",
    "RowWidthMismatchError",
    "UnparseableNumberError",
    "NegativeCountError",
    "AlreadyPreprocessedError",
    "UnknownDrugError",
    "NoControlsError",
    "EmptySplitError",
    "ConfigInvalidError",
    "TooFewCellsWarning",
    "Observation",
    "ExpressionDataset",
    "DegTable",
    "SynthConfig",
    "SynthGroundTruth",
    "TransferPairConfig",
    "load_dataset",
    "save_dataset",
    "preprocess",
    "make_split",
    "compute_degs",
    "synth_generate",
    "synth_transfer_pair",
    "ground_truth_expression",
]


class DataError(ValueError):
    pass


class MalformedHeaderError(DataError):
    pass


class RowWidthMismatchError(DataError):
    pass


class UnparseableNumberError(DataError):
    pass


class NegativeCountError(DataError):
    pass


class AlreadyPreprocessedError(DataError):
    pass


class UnknownDrugError(DataError):
    pass


class NoControlsError(DataError):
    pass


class EmptySplitError(DataError):
    pass


class ConfigInvalidError(DataError):
    pass


class TooFewCellsWarning(UserWarning):
    pass


@dataclass
class Observation:
    drug: str  # SMILES or CONTROL
    dose: float  # molar; 0 for controls
    covariate: str
    split: str | None = None

    def __post_init__(self):
        if (self.drug == CONTROL) != (self.dose == 0.0):
            raise DataError(
                f"drug {self.drug!r} with dose {self.dose!r}: CONTROL iff dose == 0"
            )


@dataclass
class ExpressionDataset:
    matrix: np.ndarray  # (cells, genes) float64
    genes: list[str]
    rows: list[Observation]
    state: str = "raw"  # "raw" | "normalized+log1p"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DataError("matrix must be 2-dimensional")
        if len(self.genes) != self.matrix.shape[1]:
            raise DataError("gene list length does not match matrix width")
        if len(set(self.genes)) != len(self.genes):
            raise DataError("duplicate gene names")
        if len(self.rows) != self.matrix.shape[0]:
            raise DataError("row metadata length does not match matrix height")

    @property
    def n_genes(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    def drug_vocab(self) -> list[str]:
        treated = sorted({r.drug for r in self.rows if r.drug != CONTROL})
        return [CONTROL] + treated

    def covariate_vocab(self) -> list[str]:
        return sorted({r.covariate for r in self.rows})

    def split_indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}")
        return np.array(
            [i for i, r in enumerate(self.rows) if r.split == split], dtype=np.intp
        )

    def copy(self) -> "ExpressionDataset":
        return ExpressionDataset(
            matrix=self.matrix.copy(),
            genes=list(self.genes),
            rows=[copy.copy(r) for r in self.rows],
            state=self.state,
            provenance=copy.deepcopy(self.provenance),
        )


def _meta_path(path: Path) -> Path:
    return Path(str(path) + ".meta.json")


def save_dataset(dataset: ExpressionDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["drug", "dose", "covariate"] + dataset.genes)
        for obs, row in zip(dataset.rows, dataset.matrix):
            writer.writerow(
                [obs.drug, repr(obs.dose), obs.covariate] + [repr(v) for v in row]
            )
    meta = {
        "state": dataset.state,
        "splits": [obs.split for obs in dataset.rows],
        "provenance": dataset.provenance,
    }
    with _meta_path(path).open("w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_dataset(path: str | Path) -> ExpressionDataset:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeaderError(f"{path}: empty file") from None
        if header[:3] != ["drug", "dose", "covariate"]:
            raise MalformedHeaderError(
                f"{path}: header must start with drug,dose,covariate"
            )
        genes = header[3:]
        if not genes:
            raise MalformedHeaderError(f"{path}: no gene columns")
        if len(set(genes)) != len(genes):
            raise MalformedHeaderError(f"{path}: duplicate gene column")
        rows: list[Observation] = []
        values: list[list[float]] = []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise RowWidthMismatchError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}"
                )
            try:
                dose = float(record[1])
                expr = [float(v) for v in record[3:]]
            except ValueError as exc:
                raise UnparseableNumberError(f"{path}:{lineno}: {exc}") from None
            try:
                rows.append(Observation(drug=record[0], dose=dose, covariate=record[2]))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            values.append(expr)
    matrix = np.array(values, dtype=np.float64) if values else np.zeros((0, len(genes)))
    dataset = ExpressionDataset(matrix=matrix, genes=genes, rows=rows)
    meta_path = _meta_path(path)
    if meta_path.exists():
        with meta_path.open("r", encoding="utf-8") as handle:
            meta = json.load(handle)
        dataset.state = meta.get("state", "raw")
        splits = meta.get("splits")
        if splits is not None:
            if len(splits) != len(rows):
                raise DataError(f"{meta_path}: split list length mismatch")
            for obs, split in zip(dataset.rows, splits):
                obs.split = split
        dataset.provenance = meta.get("provenance", {})
    return dataset


def preprocess(dataset: ExpressionDataset) -> ExpressionDataset:
    """Scale each row to the median raw row-sum, then log1p-transform."""
    if dataset.state != "raw":
        raise AlreadyPreprocessedError(f"dataset state is {dataset.state!r}")
    if np.any(dataset.matrix < 0.0):
        raise NegativeCountError("raw counts must be non-negative")
    out = dataset.copy()
    sums = out.matrix.sum(axis=1)
    median = np.median(sums)
    scale = np.ones_like(sums)
    nonzero = sums > 0.0
    scale[nonzero] = median / sums[nonzero]
    out.matrix = np.log1p(out.matrix * scale[:, None])
    out.state = "normalized+log1p"
    return out


def make_split(
    dataset: ExpressionDataset,
    holdout_drugs: list[str],
    valid_fraction: float,
    seed: int,
    control_test_fraction: float = 0.2,
) -> ExpressionDataset:
    """Assign splits: held-out drugs go to test entirely; other treated rows
    go to valid with probability ``valid_fraction``, else train. Controls are
    spread over all three splits (counterfactual scoring encodes them)."""
    if not 0.0 < valid_fraction < 1.0:
        raise DataError("valid_fraction must be in (0, 1)")
    vocab = set(dataset.drug_vocab())
    for drug in holdout_drugs:
        if drug not in vocab or drug == CONTROL:
            raise UnknownDrugError(f"holdout drug {drug!r} not in dataset")
    holdout = set(holdout_drugs)
    out = dataset.copy()
    rng = np.random.default_rng(seed)
    draws = rng.random(len(out.rows))
    control_idx = [i for i, r in enumerate(out.rows) if r.drug == CONTROL]
    if len(control_idx) < 3:
        raise NoControlsError(
            f"{len(control_idx)} control rows cannot cover train/valid/test"
        )
    for obs, draw in zip(out.rows, draws):
        if obs.drug in holdout:
            obs.split = "test"
        elif obs.drug != CONTROL:
            obs.split = "valid" if draw < valid_fraction else "train"
    # controls are allocated by seeded shuffle so every split has at least one
    shuffled = rng.permutation(control_idx)
    n_test = max(1, int(round(control_test_fraction * len(shuffled))))
    n_valid = max(1, int(round(valid_fraction * len(shuffled))))
    if n_test + n_valid >= len(shuffled):
        n_test, n_valid = 1, 1
    for pos, idx in enumerate(shuffled):
        if pos < n_test:
            out.rows[idx].split = "test"
        elif pos < n_test + n_valid:
            out.rows[idx].split = "valid"
        else:
            out.rows[idx].split = "train"
    return out


@dataclass
class DegTable:
    """Top-k differentially expressed gene indices per (drug, covariate),
    with a pooled per-drug fallback for sparse combinations."""

    combos: dict[tuple[str, str], np.ndarray]
    pooled: dict[str, np.ndarray]
    k: int

    def lookup(self, drug: str, covariate: str) -> np.ndarray:
        key = (drug, covariate)
        if key in self.combos:
            return self.combos[key]
        if drug in self.pooled:
            return self.pooled[drug]
        raise KeyError(f"no DEG entry for {key!r}")


def _welch_t(treated: np.ndarray, control: np.ndarray) -> np.ndarray:
    mean_diff = treated.mean(axis=0) - control.mean(axis=0)
    var_t = treated.var(axis=0, ddof=1) if treated.shape[0] > 1 else np.zeros(
        treated.shape[1]
    )
    var_c = control.var(axis=0, ddof=1) if control.shape[0] > 1 else np.zeros(
        control.shape[1]
    )
    denom = np.sqrt(var_t / treated.shape[0] + var_c / control.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(
            mean_diff == 0.0,
            0.0,
            np.where(denom == 0.0, np.sign(mean_diff) * np.inf, mean_diff / denom),
        )
    return t


def _top_k(t_stats: np.ndarray, k: int) -> np.ndarray:
    # |t| descending, gene index ascending as the deterministic tie-break
    order = np.lexsort((np.arange(t_stats.size), -np.abs(t_stats)))
    return order[:k]


def compute_degs(
    dataset: ExpressionDataset, k: int = 50, min_cells: int = 5
) -> DegTable:
    """Welch t-statistics of treated vs same-covariate control rows."""
    if dataset.state != "normalized+log1p":
        raise DataError("compute_degs expects a preprocessed dataset")
    drugs = np.array([r.drug for r in dataset.rows])
    covs = np.array([r.covariate for r in dataset.rows])
    is_control = drugs == CONTROL
    if not is_control.any():
        raise NoControlsError("dataset has no control rows")
    k = min(k, dataset.n_genes)
    combos: dict[tuple[str, str], np.ndarray] = {}
    pooled: dict[str, np.ndarray] = {}
    all_controls = dataset.matrix[is_control]
    for drug in dataset.drug_vocab()[1:]:
        treated_mask = drugs == drug
        pooled[drug] = _top_k(_welch_t(dataset.matrix[treated_mask], all_controls), k)
        for cov in dataset.covariate_vocab():
            mask = treated_mask & (covs == cov)
            n_treated = int(mask.sum())
            if n_treated == 0:
                continue
            control_mask = is_control & (covs == cov)
            if not control_mask.any():
                raise NoControlsError(f"no controls for covariate {cov!r}")
            if n_treated < min_cells:
                warnings.warn(
                    f"({drug!r}, {cov!r}): {n_treated} cells < {min_cells}; "
                    "falling back to the pooled per-drug table",
                    TooFewCellsWarning,
                    stacklevel=2,
                )
                continue
            t = _welch_t(dataset.matrix[mask], dataset.matrix[control_mask])
            combos[(drug, cov)] = _top_k(t, k)
    return DegTable(combos=combos, pooled=pooled, k=k)


# ---------------------------------------------------------------------------
# synthetic ground-truth generation


@dataclass
class SynthConfig:
    n_genes: int = 60
    n_drugs: int = 12
    n_covariates: int = 3
    cells_per_combo: int = 200  # per (drug, covariate); doses cycle within
    latent_dim: int = 16
    fingerprint_dim: int = 32
    noise_sigma: float = 0.05
    seed: int = 0
    doses: tuple[float, ...] = (1e-8, 1e-7, 1e-6, 1e-5)
    control_cells_per_covariate: int | None = None  # defaults to cells_per_combo
    basal_scale: float = 0.75
    covariate_scale: float = 0.5
    drug_effect_scale: float = 1.0
    baseline_log_range: tuple[float, float] = (2.0, 5.0)
    max_path_len: int = 7
    counts: bool = True  # False emits clean log-space data (state preprocessed)

    def validate(self) -> None:
        numeric = (
            self.n_genes,
            self.n_drugs,
            self.n_covariates,
            self.cells_per_combo,
            self.latent_dim,
        )
        if any(v < 1 for v in numeric):
            raise ConfigInvalidError("all synthetic counts must be >= 1")
        if self.fingerprint_dim < 8:
            raise ConfigInvalidError("fingerprint_dim must be >= 8")
        if self.noise_sigma < 0.0:
            raise ConfigInvalidError("noise_sigma must be >= 0")
        if not self.doses or any(d <= 0.0 for d in self.doses):
            raise ConfigInvalidError("doses must be positive")


@dataclass
class SynthGroundTruth:
    decoder_weights: np.ndarray  # (genes, latent)
    decoder_bias: np.ndarray  # (genes,)
    encoder_weights: np.ndarray  # (latent, genes), pseudo-inverse of the decoder
    encoder_bias: np.ndarray  # (latent,)
    drug_map: np.ndarray  # (latent, fingerprint_dim)
    covariate_names: list[str]
    covariate_offsets: np.ndarray  # (covariates, latent)
    drug_smiles: list[str]
    fingerprints: dict[str, np.ndarray]
    basal_latents: np.ndarray  # (cells, latent), row-aligned with the dataset
    noise_sigma: float
    config: SynthConfig


def _random_molecule(rng: np.random.Generator) -> str:
    """Random branched alkane or alcohol (hydroxyl and alkyl branches)."""
    length = int(rng.integers(3, 11))
    parts = []
    for i in range(length):
        parts.append("C")
        if 0 < i < length - 1 and rng.random() < 0.35:
            branch = rng.random()
            if branch < 0.45:
                parts.append("(C)")
            elif branch < 0.7:
                parts.append("(CC)")
            else:
                parts.append("(O)")
    if rng.random() < 0.6:
        parts.append("O")
    return "".join(parts)


def _generate_drugs(
    rng: np.random.Generator, count: int, dim: int, max_len: int
) -> tuple[list[str], dict[str, np.ndarray]]:
    smiles: list[str] = []
    fps: dict[str, np.ndarray] = {}
    seen: set[bytes] = set()
    attempts = 0
    while len(smiles) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ConfigInvalidError(
                "could not generate enough drugs with distinct fingerprints"
            )
        candidate = _random_molecule(rng)
        if candidate in fps:
            continue
        values = fingerprint_smiles(candidate, dim=dim, max_len=max_len).values
        key = values.tobytes()
        if key in seen:
            continue
        seen.add(key)
        smiles.append(candidate)
        fps[candidate] = values
    return smiles, fps


def dose_transform(dose: np.ndarray | float) -> np.ndarray | float:
    """Map molar dose to [0, 1]: (log10(dose) + 9) / 4, clamped."""
    return np.clip((np.log10(dose) + 9.0) / 4.0, 0.0, 1.0)


def ground_truth_expression(
    truth: SynthGroundTruth,
    basal: np.ndarray,
    drug: str,
    dose: float,
    covariate: str,
) -> np.ndarray:
    """Noise-free log-space expression for given latents and attributes."""
    z = np.asarray(basal, dtype=np.float64).copy()
    if drug != CONTROL:
        scaled = float(dose_transform(dose))
        z = z + scaled * (truth.drug_map @ truth.fingerprints[drug])
    z = z + truth.covariate_offsets[truth.covariate_names.index(covariate)]
    return truth.decoder_weights @ z + truth.decoder_bias


def synth_generate(config: SynthConfig) -> tuple[ExpressionDataset, SynthGroundTruth]:
    config.validate()
    rng = np.random.default_rng(config.seed)
    smiles, fps = _generate_drugs(
        rng, config.n_drugs, config.fingerprint_dim, config.max_path_len
    )
    covariate_names = [f"Cov{i}" for i in range(config.n_covariates)]
    truth = _build_truth(rng, config, smiles, fps, covariate_names)
    dataset = _emit_dataset(rng, config, truth)
    return dataset, truth


def _build_truth(
    rng: np.random.Generator,
    config: SynthConfig,
    smiles: list[str],
    fps: dict[str, np.ndarray],
    covariate_names: list[str],
    decoder_weights: np.ndarray | None = None,
    decoder_bias: np.ndarray | None = None,
    drug_map: np.ndarray | None = None,
    covariate_offsets: np.ndarray | None = None,
) -> SynthGroundTruth:
    l = config.latent_dim
    if decoder_weights is None:
        decoder_weights = rng.normal(0.0, 1.0 / np.sqrt(l), size=(config.n_genes, l))
    if decoder_bias is None:
        decoder_bias = rng.uniform(*config.baseline_log_range, size=config.n_genes)
    if drug_map is None:
        mean_bits = np.mean([fps[s].sum() for s in smiles])
        sigma = config.drug_effect_scale / np.sqrt(max(mean_bits, 1.0))
        drug_map = rng.normal(0.0, sigma, size=(l, config.fingerprint_dim))
    if covariate_offsets is None:
        covariate_offsets = rng.normal(
            0.0, config.covariate_scale, size=(config.n_covariates, l)
        )
    encoder_weights = np.linalg.pinv(decoder_weights)
    return SynthGroundTruth(
        decoder_weights=decoder_weights,
        decoder_bias=decoder_bias,
        encoder_weights=encoder_weights,
        encoder_bias=-encoder_weights @ decoder_bias,
        drug_map=drug_map,
        covariate_names=covariate_names,
        covariate_offsets=covariate_offsets,
        drug_smiles=smiles,
        fingerprints=fps,
        basal_latents=np.zeros((0, l)),
        noise_sigma=config.noise_sigma,
        config=config,
    )


def _emit_dataset(
    rng: np.random.Generator, config: SynthConfig, truth: SynthGroundTruth
) -> ExpressionDataset:
    rows: list[Observation] = []
    latents: list[np.ndarray] = []
    expressions: list[np.ndarray] = []
    n_controls = config.control_cells_per_covariate or config.cells_per_combo
    doses = list(config.doses)
    for cov_idx, cov in enumerate(truth.covariate_names):
        for _ in range(n_controls):
            z = rng.normal(0.0, config.basal_scale, size=config.latent_dim)
            latents.append(z)
            rows.append(Observation(drug=CONTROL, dose=0.0, covariate=cov))
            expressions.append(_expression_row(rng, config, truth, z, cov_idx, None, 0.0))
        for drug in truth.drug_smiles:
            for cell in range(config.cells_per_combo):
                dose = doses[cell % len(doses)]
                z = rng.normal(0.0, config.basal_scale, size=config.latent_dim)
                latents.append(z)
                rows.append(Observation(drug=drug, dose=dose, covariate=cov))
                expressions.append(
                    _expression_row(rng, config, truth, z, cov_idx, drug, dose)
                )
    matrix = np.vstack(expressions)
    truth.basal_latents = np.vstack(latents)
    genes = [f"G{i:03d}" for i in range(config.n_genes)]
    state = "raw" if config.counts else "normalized+log1p"
    dataset = ExpressionDataset(
        matrix=matrix,
        genes=genes,
        rows=rows,
        state=state,
        provenance={"generator": "synthetic", "config": asdict(config)},
    )
    return dataset


def _expression_row(
    rng: np.random.Generator,
    config: SynthConfig,
    truth: SynthGroundTruth,
    basal: np.ndarray,
    cov_idx: int,
    drug: str | None,
    dose: float,
) -> np.ndarray:
    z = basal.copy()
    if drug is not None:
        z += float(dose_transform(dose)) * (truth.drug_map @ truth.fingerprints[drug])
    z += truth.covariate_offsets[cov_idx]
    log_expr = truth.decoder_weights @ z + truth.decoder_bias
    if config.noise_sigma > 0.0:
        log_expr = log_expr + rng.normal(0.0, config.noise_sigma, size=log_expr.shape)
    if not config.counts:
        return log_expr
    return np.maximum(np.rint(np.expm1(log_expr)), 0.0)


@dataclass
class TransferPairConfig:
    """Source/target datasets sharing latent ground truth with disjoint drug
    lists and partially overlapping gene sets."""

    source_genes: int = 60
    target_genes: int = 60
    gene_overlap_fraction: float = 0.6
    source_drugs: int = 20
    target_drugs: int = 6
    source_cells_per_combo: int = 180
    target_cells_per_combo: int = 80
    source_controls_per_covariate: int = 400
    target_controls_per_covariate: int = 120
    n_covariates: int = 2
    latent_dim: int = 16
    fingerprint_dim: int = 32
    noise_sigma: float = 0.05
    seed: int = 0
    doses: tuple[float, ...] = (1e-8, 1e-7, 1e-6, 1e-5)
    basal_scale: float = 0.75
    covariate_scale: float = 0.5
    drug_effect_scale: float = 1.0
    max_path_len: int = 7
    counts: bool = True


def synth_transfer_pair(
    config: TransferPairConfig,
) -> tuple[ExpressionDataset, ExpressionDataset, SynthGroundTruth, SynthGroundTruth]:
    """Generate a (source, target) pair over one latent ground truth."""
    if not 0.0 < config.gene_overlap_fraction <= 1.0:
        raise ConfigInvalidError("gene_overlap_fraction must be in (0, 1]")
    rng = np.random.default_rng(config.seed)
    n_shared = int(round(config.gene_overlap_fraction * config.target_genes))
    if n_shared > config.source_genes:
        raise ConfigInvalidError("overlap larger than the source gene set")
    n_union = config.source_genes + config.target_genes - n_shared
    union_names = [f"G{i:03d}" for i in range(n_union)]

    all_smiles, all_fps = _generate_drugs(
        rng,
        config.source_drugs + config.target_drugs,
        config.fingerprint_dim,
        config.max_path_len,
    )
    src_smiles = all_smiles[: config.source_drugs]
    tgt_smiles = all_smiles[config.source_drugs :]
    covariate_names = [f"Cov{i}" for i in range(config.n_covariates)]

    l = config.latent_dim
    union_decoder = rng.normal(0.0, 1.0 / np.sqrt(l), size=(n_union, l))
    union_bias = rng.uniform(2.0, 5.0, size=n_union)
    mean_bits = np.mean([all_fps[s].sum() for s in all_smiles])
    drug_map = rng.normal(
        0.0,
        config.drug_effect_scale / np.sqrt(max(mean_bits, 1.0)),
        size=(l, config.fingerprint_dim),
    )
    cov_offsets = rng.normal(0.0, config.covariate_scale, size=(config.n_covariates, l))

    shared = rng.choice(config.source_genes, size=n_shared, replace=False)
    shared.sort()
    source_idx = np.arange(config.source_genes)
    target_only = np.arange(config.source_genes, n_union)
    target_idx = np.concatenate([shared, target_only])
    perm = rng.permutation(target_idx.size)
    target_idx = target_idx[perm]

    def make_half(
        gene_idx: np.ndarray,
        smiles: list[str],
        cells: int,
        controls: int,
        seed: int,
        n_drugs: int,
    ) -> tuple[ExpressionDataset, SynthGroundTruth]:
        cfg = SynthConfig(
            n_genes=gene_idx.size,
            n_drugs=n_drugs,
            n_covariates=config.n_covariates,
            cells_per_combo=cells,
            latent_dim=l,
            fingerprint_dim=config.fingerprint_dim,
            noise_sigma=config.noise_sigma,
            seed=seed,
            doses=config.doses,
            control_cells_per_covariate=controls,
            basal_scale=config.basal_scale,
            covariate_scale=config.covariate_scale,
            drug_effect_scale=config.drug_effect_scale,
            counts=config.counts,
        )
        truth = _build_truth(
            np.random.default_rng(seed),
            cfg,
            smiles,
            {s: all_fps[s] for s in smiles},
            covariate_names,
            decoder_weights=union_decoder[gene_idx],
            decoder_bias=union_bias[gene_idx],
            drug_map=drug_map,
            covariate_offsets=cov_offsets,
        )
        dataset = _emit_dataset(np.random.default_rng(seed + 1), cfg, truth)
        dataset.genes = [union_names[i] for i in gene_idx]
        return dataset, truth

    source_ds, source_truth = make_half(
        source_idx,
        src_smiles,
        config.source_cells_per_combo,
        config.source_controls_per_covariate,
        config.seed + 101,
        config.source_drugs,
    )
    target_ds, target_truth = make_half(
        target_idx,
        tgt_smiles,
        config.target_cells_per_combo,
        config.target_controls_per_covariate,
        config.seed + 202,
        config.target_drugs,
    )
    return source_ds, target_ds, source_truth, target_truth
