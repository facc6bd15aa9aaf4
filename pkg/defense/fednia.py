"""
Noise-induced activation defense: probe every client update and the global
state with shared random inputs, train the sub-autoencoder on the global
responses, score each client by reconstruction error and filter before
aggregation.
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from defense.detector import DetectorNet, build_detector, score, train_detector
from defense.filtering import FilterDirection, filter_updates, threshold_stats
from defense.noise import NoiseBatch, NoiseDistribution, generate_noise
from defense.probe import probe_matrix
from federation.types import ClientUpdate, RoundReport
from network.layers import WeightSet
from utils.exceptions import DefenseError, InputError, RunIOError
from utils.logger import get_logger
from utils.seeding import derive_seed


class DefenseParams(BaseModel):
    """Probe, detector and threshold settings."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    nu: int = Field(default=100, ge=1)
    detector_epochs: int = Field(default=50, ge=0)
    detector_batch: int = Field(default=10, ge=1)
    detector_lr: float = Field(default=0.02, ge=0.0)
    lam: float = Field(default=1.0, ge=0.0, alias="lambda")
    filter_direction: FilterDirection = FilterDirection.EXCLUDE_ABOVE
    min_survivors: int = Field(default=1, ge=1)
    noise_distribution: NoiseDistribution = NoiseDistribution.UNIFORM01
    noise_mean: float = 0.0
    noise_std: float = Field(default=1.0, ge=0.0)
    warm_start: bool = False
    dump_profiles: bool = False


class FedNIADefense:
    """Per-round update filter; ``defend`` is called by the server before aggregation."""

    def __init__(self, params: DefenseParams, seed: int = 0, executor: Optional[ThreadPoolExecutor] = None,
                 profile_dir: Optional[Path] = None):
        """
        Initialize the defense.

        Args:
            params: Defense settings
            seed: Master seed for noise, detector init and detector shuffling
            executor: Optional thread pool for probing client updates
            profile_dir: Where ``round_XXXX.npz`` dumps go when ``params.dump_profiles`` is set
        """
        self.params = params
        self.seed = seed
        self.executor = executor
        self.profile_dir = profile_dir
        self.logger = get_logger(self.__class__.__name__)
        self._detector: Optional[DetectorNet] = None

    def _probe_clients(self, updates: Sequence[ClientUpdate], noise: NoiseBatch) -> list[np.ndarray]:
        def averaged(update: ClientUpdate) -> np.ndarray:
            return probe_matrix(update.weights, noise)[0].mean(axis=0)

        if self.executor is None:
            return [averaged(u) for u in updates]
        return list(self.executor.map(averaged, updates))

    def _fresh_detector(self, global_weights: WeightSet, round_index: int) -> DetectorNet:
        if self.params.warm_start and self._detector is not None:
            return self._detector
        return build_detector(global_weights.specs, derive_seed(self.seed, "detector", round_index),
                              dtype=global_weights.dtype)

    def _dump(self, round_index: int, global_matrix: np.ndarray, ids: list[int], client_profiles: list[np.ndarray]) -> None:
        if not (self.params.dump_profiles and self.profile_dir is not None):
            return
        path = self.profile_dir / f"round_{round_index:04d}.npz"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savez(path, global_profiles=global_matrix, client_ids=np.asarray(ids, dtype=np.int64),
                     client_profiles=np.stack(client_profiles))
        except OSError as exc:
            raise RunIOError("cannot write activation profiles", path) from exc

    def defend(self, global_weights: WeightSet, updates: Sequence[ClientUpdate],
               round_index: int) -> tuple[list[ClientUpdate], RoundReport]:
        """
        Score and filter one round of updates.

        Args:
            global_weights: Global state the clients started from (not modified)
            updates: All client updates of the round
            round_index: Current round

        Returns:
            (surviving updates sorted by client id, RoundReport)
        """
        if not updates:
            raise DefenseError("no client updates to score")
        ordered = sorted(updates, key=lambda u: u.client_id)
        ids = [u.client_id for u in ordered]
        params = self.params

        noise = generate_noise(params.nu, global_weights.input_size, self.seed, round_index,
                               params.noise_distribution, params.noise_mean, params.noise_std)
        global_matrix, _ = probe_matrix(global_weights, noise)
        client_profiles = self._probe_clients(ordered, noise)
        self._dump(round_index, global_matrix, ids, client_profiles)

        try:
            detector = train_detector(
                self._fresh_detector(global_weights, round_index),
                global_matrix,
                epochs=params.detector_epochs,
                batch_size=params.detector_batch,
                learning_rate=params.detector_lr,
                seed=derive_seed(self.seed, "detector-train", round_index),
            )
        except DefenseError as exc:
            self.logger.warning(f"round {round_index}: {exc}; keeping all updates")
            return list(ordered), RoundReport(
                round=round_index, client_ids=tuple(ids), survivors=tuple(ids),
                fallback=True, fallback_reason=f"detector divergence: {exc}",
            )
        if params.warm_start:
            self._detector = detector

        errors = {cid: score(detector, profile, len(ordered)) for cid, profile in zip(ids, client_profiles)}
        report_base = dict(
            round=round_index,
            client_ids=tuple(ids),
            errors=errors,
            detector_final_loss=detector.epoch_losses[-1] if detector.epoch_losses else None,
            detector_losses=list(detector.epoch_losses),
        )
        try:
            _, sigma, tau = threshold_stats(list(errors.values()), params.lam)
        except InputError as exc:
            self.logger.warning(f"round {round_index}: {exc}; keeping all updates")
            return list(ordered), RoundReport(
                survivors=tuple(ids), fallback=True, fallback_reason=f"unusable scores: {exc}", **report_base
            )

        survivors, fallback = filter_updates(ordered, list(errors.values()), tau,
                                             params.filter_direction, params.min_survivors)
        if fallback:
            self.logger.warning(
                f"round {round_index}: fewer than {params.min_survivors} updates passed tau={tau:.6g}; "
                "keeping all updates"
            )
        else:
            rejected = sorted(set(ids) - {u.client_id for u in survivors})
            self.logger.info(f"round {round_index}: tau={tau:.6g} sigma={sigma:.6g}, rejected {rejected}")
        return survivors, RoundReport(
            survivors=tuple(u.client_id for u in survivors),
            tau=tau,
            sigma=sigma,
            fallback=fallback,
            fallback_reason="too few survivors" if fallback else None,
            **report_base,
        )


def defend(global_weights: WeightSet, updates: Sequence[ClientUpdate], params: DefenseParams,
           round_seed: int) -> tuple[list[ClientUpdate], RoundReport]:
    """
    One-shot defense for a single round with its own seed.

    Args:
        global_weights: Global state
        updates: Client updates
        params: Defense settings
        round_seed: Seed for this round's noise and detector

    Returns:
        (survivors, report)
    """
    return FedNIADefense(params, seed=round_seed).defend(global_weights, updates, round_index=0)
