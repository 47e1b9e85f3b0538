"""Paths to the data files shipped with the package."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from flexgrid.flexmodel import SiteConfig, load_site

DATA = Path(str(files("flexgrid") / "data"))
REFERENCE_SITE = DATA / "reference_site.json"
REFERENCE_ANSWERS = DATA / "reference_answers.json"
SAMPLE_EVENT = DATA / "sample_event.json"


def reference_site() -> SiteConfig:
    return load_site(REFERENCE_SITE)
