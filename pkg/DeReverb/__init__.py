# Copyright (c) 2025 DeReverb contributors
# Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
# Part of the DeReverb project. All rights reserved where applicable.


from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

__version__ = "0.1.0"
StartTime = datetime.now()

from DeReverb.core import ExperimentConfig, MetricReport, config, feature_cache, load_experiment_config
from DeReverb.logger import LOGGER


class Toolkit:
    """Experiment runner wiring the runtime config and caches to the subcommands."""

    def __init__(self, config_path: Optional[Path] = None, out: Optional[Path] = None, seed: Optional[int] = None) -> None:
        self.experiment: ExperimentConfig = load_experiment_config(config_path)
        self.out = out
        self.seed = seed
        self._initialize_services()

    def _initialize_services(self) -> None:
        self.config = config
        self.cache = feature_cache
        self._start_time = StartTime
        self._version = __version__
        LOGGER.debug("Toolkit %s with %d worker(s)", self._version, self.config.WORKERS)

    async def prepare(self):
        from DeReverb.modules import cmd_prepare

        return await cmd_prepare(self.experiment, self.out, self.seed)

    async def train(self, model_ids: Sequence[str]) -> list[Path]:
        from DeReverb.modules import cmd_train

        paths: list[Path] = []
        for model_id in model_ids:
            paths.extend(await cmd_train(self.experiment, model_id, self.out, self.seed))
            self.cache.clear()
        return paths

    async def evaluate(self, model_ids: Optional[Sequence[str]] = None) -> MetricReport:
        from DeReverb.modules import cmd_evaluate

        return await cmd_evaluate(self.experiment, model_ids, self.out)

    def uptime(self) -> float:
        return (datetime.now() - self._start_time).total_seconds()
