"""Write reports as YAML, or as Markdown through Jinja2 templates."""

import logging
from pathlib import Path

import yaml
from jinja2 import Environment, FileSystemLoader, TemplateNotFound
from pydantic import BaseModel

from svd_rnd.errors import InputValidationError
from svd_rnd.models import ReportTemplateMetadata
from svd_rnd.services.format_utils import format_bits, format_metric, format_percentage

logger = logging.getLogger(__name__)


class ReportRenderer:
    """Renders typed reports with the templates listed in ``templates/metadata.yaml``."""

    def __init__(self, templates_dir: Path | None = None):
        self.templates_dir = templates_dir or Path(__file__).parent.parent / "templates"
        self.metadata, self.jinja_env = self._load_templates()

    def _load_templates(self) -> tuple[dict[str, ReportTemplateMetadata], Environment]:
        """Load template metadata and build the Jinja2 environment."""
        with open(self.templates_dir / "metadata.yaml", encoding="utf-8") as f:
            raw_metadata = yaml.safe_load(f)

        metadata = {key: ReportTemplateMetadata(**value) for key, value in raw_metadata.items()}

        env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)), keep_trailing_newline=True
        )
        env.filters["metric"] = format_metric
        env.filters["bits"] = format_bits
        env.filters["share"] = format_percentage
        return metadata, env

    def render(self, kind: str, report: BaseModel) -> str:
        """Render one report kind to Markdown.

        Raises:
            InputValidationError: If the kind has no template.
        """
        metadata = self.metadata.get(kind)
        if metadata is None:
            raise InputValidationError(f"no report template for {kind!r}")
        try:
            template = self.jinja_env.get_template(metadata.file)
        except TemplateNotFound as e:
            raise InputValidationError(f"Template file not found: {metadata.file}") from e
        return template.render(title=metadata.name, report=report)

    def write(self, kind: str, report: BaseModel, path: str | Path) -> Path:
        """Write ``report`` to ``path``: Markdown for ``.md`` paths, YAML otherwise."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix.lower() == ".md":
            text = self.render(kind, report)
        else:
            text = yaml.safe_dump(report.model_dump(mode="json"), sort_keys=False)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {kind} report to {path}")
        return path
