"""Shared fixtures: synthetic scenarios generated once per session."""

import pytest

from crowdcdr import attendance as att
from crowdcdr import synth


@pytest.fixture(scope="session")
def desk_small_truth():
    """Small default scenario (~5k visible persons) with full ground truth."""
    return synth.generate_tables(synth.named_scenario("desk-small", seed=1))


@pytest.fixture(scope="session")
def desk_small_files(tmp_path_factory):
    """The same scenario written to disk in the pipeline's file formats."""
    outdir = tmp_path_factory.mktemp("desk_small")
    paths, truth = synth.generate(synth.named_scenario("desk-small", seed=1), outdir)
    return paths, truth


@pytest.fixture(scope="session")
def desk_small_series(desk_small_truth):
    """Attendance series assembled from the small scenario's tables."""
    truth = desk_small_truth
    return att.build_series(
        truth.observations(),
        truth.observed_counts,
        truth.profiles(),
        total_days=truth.n_days,
        projections=synth.emit_projections(truth, noise=0.0),
    )


@pytest.fixture(scope="session")
def band_truth():
    """Scenario whose per-state co-location targets span a fixed band."""
    return synth.generate_tables(synth.band_scenario(seed=1))
