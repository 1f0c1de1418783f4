"""Command line entry points.

`run` executes a protocol headlessly with the synthetic observer, `preview`
renders a defocus-blurred still, `validate` checks a setup without running
it, and `serve` exposes the interactive session service. The data root
(questionnaires, session output) defaults to ./visionsim_data and can be
overridden with --data-root or the VISIONSIM_DATA environment variable.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .blur import ViewGeometry, apply_blur, compute_blur_field, render_office_scene
from .depth import read_depth, write_depth_pfm
from .engine import PACKAGED_DATA_DIR, EngineConfig, SessionEngine, validate_setup
from .errors import StateError, ValidationError
from .experiment import load_protocol
from .optics import AUTOFOCAL_ALGORITHMS, AutofocalConfig, FocusState, RefractionProfile
from .task import SceneLayout

DATA_ENV_VAR = "VISIONSIM_DATA"


def _data_root(option_value) -> Path:
    if option_value:
        return Path(option_value)
    env = os.environ.get(DATA_ENV_VAR)
    return Path(env) if env else Path("visionsim_data")


def _questionnaire_root(data_root: Path) -> Path:
    local = data_root / "questionnaires"
    return data_root if local.is_dir() else PACKAGED_DATA_DIR


def _fail(message: str, as_json: bool, code: int = 2) -> None:
    if as_json:
        click.echo(json.dumps({"error": message}), err=True)
    else:
        click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__, prog_name="visionsim")
def main() -> None:
    """Headless vision-science experiment engine."""


@main.command()
@click.option("--protocol", "protocol_path", type=click.Path(), default=None,
              help="Protocol JSON; defaults to the bundled demo protocol.")
@click.option("--subject", default="headless", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--data-root", default=None,
              help=f"Data folder (default ./visionsim_data, env {DATA_ENV_VAR}).")
@click.option("--devices", "devices_path", type=click.Path(), default=None,
              help="Gaze device registry JSON (validated; headless runs simulate).")
@click.option("--trials", type=int, default=None,
              help="Trials per matching-task scene (overrides the default).")
@click.option("--algorithm", type=click.Choice(AUTOFOCAL_ALGORITHMS),
              default="instant", show_default=True)
@click.option("--fixed-focus", type=float, default=None,
              help="Disable the autofocal and fix focus at this distance (m).")
@click.option("--json-errors", is_flag=True,
              help="Emit machine-readable JSON diagnostics on failure.")
def run(protocol_path, subject, seed, data_root, devices_path, trials,
        algorithm, fixed_focus, json_errors) -> None:
    """Run a protocol headlessly and write the session artifacts."""
    root = _data_root(data_root)
    path = protocol_path or PACKAGED_DATA_DIR / "demo_protocol.json"
    try:
        protocol = load_protocol(path)
        problems = validate_setup(protocol=protocol,
                                  data_root=_questionnaire_root(root),
                                  devices_path=devices_path)
        if problems:
            _fail("; ".join(problems), json_errors)
        overrides = {}
        if trials is not None:
            overrides["n_trials"] = trials
        if fixed_focus is not None:
            overrides["autofocal"] = None
            overrides["fixed_focus_m"] = fixed_focus
        else:
            overrides["autofocal"] = AutofocalConfig(algorithm=algorithm)
        config = EngineConfig(**overrides)
        engine = SessionEngine(protocol, root / "sessions",
                               data_root=_questionnaire_root(root),
                               seed=seed, config=config)
        session = engine.run_headless(subject=subject)
    except (ValidationError, StateError, FileNotFoundError, OSError) as exc:
        _fail(str(exc), json_errors)
        return
    click.echo(f"session written to {session.session_dir}")


@main.command()
@click.option("--image", "image_path", type=click.Path(), default=None,
              help="Input image (PNG); omit to render the synthetic office scene.")
@click.option("--depth", "depth_path", type=click.Path(), default=None,
              help="Depth map (.pfm meters or .png millimeters).")
@click.option("--sphere", type=float, default=0.0, show_default=True)
@click.option("--cylinder", type=float, default=0.0, show_default=True)
@click.option("--axis", type=float, default=0.0, show_default=True)
@click.option("--residual", type=float, default=0.0, show_default=True,
              help="Residual accommodation range (diopters).")
@click.option("--lens", type=float, default=0.0, show_default=True,
              help="Tunable lens power (diopters).")
@click.option("--focus-distance", type=float, default=None,
              help="Set lens power to 1/distance instead of --lens.")
@click.option("--pupil", type=float, default=4.0, show_default=True)
@click.option("--fov", type=float, default=90.0, show_default=True,
              help="Horizontal field of view (degrees).")
@click.option("--width", type=int, default=720, show_default=True,
              help="Synthetic render width (ignored with --image).")
@click.option("--height", type=int, default=450, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--field-out", type=click.Path(), default=None,
              help="Also write the blur-field magnitude as a grayscale PNG.")
@click.option("--depth-out", type=click.Path(), default=None,
              help="Also write the synthetic scene depth (.pfm).")
@click.option("--json-errors", is_flag=True)
def preview(image_path, depth_path, sphere, cylinder, axis, residual, lens,
            focus_distance, pupil, fov, width, height, out_path, field_out,
            depth_out, json_errors) -> None:
    """Render a defocus-blurred preview image."""
    from PIL import Image

    try:
        if (image_path is None) != (depth_path is None):
            raise ValidationError("--image and --depth must be given together")
        if focus_distance is not None:
            if focus_distance <= 0:
                raise ValidationError("--focus-distance must be > 0")
            lens = 1.0 / focus_distance
        profile = RefractionProfile(sphere=sphere, cylinder=cylinder, axis=axis,
                                    residual_accommodation=residual)
        focus = FocusState(lens_power=lens, pupil_diameter=pupil)
        if image_path is None:
            geometry = ViewGeometry(fov, width, height)
            image, depth = render_office_scene(SceneLayout.default_office(),
                                               geometry)
        else:
            image = np.asarray(Image.open(image_path).convert("RGB"))
            depth = read_depth(depth_path)
            if depth.shape != image.shape[:2]:
                raise ValidationError(
                    f"image {image.shape[1]}x{image.shape[0]} and depth "
                    f"{depth.width}x{depth.height} dimensions differ")
            geometry = ViewGeometry(fov, image.shape[1], image.shape[0])
        field = compute_blur_field(depth, profile, focus, None, geometry)
        blurred = apply_blur(image, field)
        Image.fromarray(blurred).save(out_path)
        if field_out:
            magnitude = field.major_px
            peak = float(magnitude.max())
            scaled = (magnitude / peak * 255.0) if peak > 0 else magnitude
            Image.fromarray(scaled.astype(np.uint8), mode="L").save(field_out)
        if depth_out:
            write_depth_pfm(depth_out, depth)
    except (ValidationError, ValueError, FileNotFoundError, OSError) as exc:
        _fail(str(exc), json_errors)
        return
    click.echo(f"preview written to {out_path}")


@main.command()
@click.option("--protocol", "protocol_path", type=click.Path(), default=None)
@click.option("--data-root", default=None)
@click.option("--devices", "devices_path", type=click.Path(), default=None)
@click.option("--json", "as_json", is_flag=True,
              help="Print the problem list as JSON.")
def validate(protocol_path, data_root, devices_path, as_json) -> None:
    """Check a protocol / data / device setup without running it."""
    root = _data_root(data_root)
    path = protocol_path or PACKAGED_DATA_DIR / "demo_protocol.json"
    problems = validate_setup(path, data_root=_questionnaire_root(root),
                              devices_path=devices_path)
    if as_json:
        click.echo(json.dumps({"valid": not problems, "problems": problems}))
    else:
        for problem in problems:
            click.echo(f"problem: {problem}")
        if not problems:
            click.echo("setup valid")
    if problems:
        sys.exit(2)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--protocol", "protocol_path", type=click.Path(), default=None)
@click.option("--data-root", default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--static-dir", type=click.Path(), default=None,
              help="Frontend bundle to serve at /; defaults to ./frontend/dist.")
def serve(host, port, protocol_path, data_root, seed, static_dir) -> None:
    """Serve the interactive session over HTTP + WebSocket."""
    import uvicorn

    from .service import create_app

    root = _data_root(data_root)
    if static_dir is None:
        candidate = Path("frontend") / "dist"
        static_dir = candidate if candidate.is_dir() else None
    app = create_app(protocol_path=protocol_path,
                     data_root=_questionnaire_root(root),
                     sessions_root=root / "sessions",
                     seed=seed, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
