from .densify import DensifyReport, densify_and_prune
from .io import SplatBundleError, dump_splats, load_splats, parse_splats, save_splats
from .model import SplatModel, WorldGaussians, materialize, spawn_from_mesh
from .render import RenderContext, RenderOutput, StaleContextError, backward, render
from .ste import clip_ste, clip_ste_grad, project_simplex, project_simplex_grad
from .train import Adam, DensifyStats, LossReport, Trainer

__all__ = [
    "Adam",
    "DensifyReport",
    "DensifyStats",
    "LossReport",
    "RenderContext",
    "RenderOutput",
    "SplatBundleError",
    "SplatModel",
    "StaleContextError",
    "Trainer",
    "WorldGaussians",
    "backward",
    "clip_ste",
    "clip_ste_grad",
    "densify_and_prune",
    "dump_splats",
    "load_splats",
    "materialize",
    "parse_splats",
    "project_simplex",
    "project_simplex_grad",
    "render",
    "save_splats",
    "spawn_from_mesh",
]
