"""System and clinical prompt assembly for report generation."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

SYSTEM_PROMPT = (
    "The assistant specialised in comparing Chest X-ray images, "
    "identifying differences, and noting temporal changes."
)
IMAGE_PLACEHOLDER = "<image>"
SECTION_ORDER = ("Indication", "History", "Comparison", "Technique")
TARGETS = ("Findings", "Impression")


@dataclass(frozen=True)
class ReportSections:
    indication: str | None = None
    history: str | None = None
    comparison: str | None = None
    technique: str | None = None
    target: str = "Findings"

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {self.target!r}")

    def present(self) -> list[tuple[str, str]]:
        out = []
        for name in SECTION_ORDER:
            value = getattr(self, name.lower())
            if value is not None and value.strip():
                out.append((name, value.strip()))
        return out

    @classmethod
    def parse(cls, text: str, target: str = "Findings") -> "ReportSections":
        """Read ``Name: value`` lines; unknown section names are ignored."""
        values = {}
        for line in text.splitlines():
            name, sep, value = line.partition(":")
            key = name.strip().lower()
            if sep and key in {s.lower() for s in SECTION_ORDER}:
                values[key] = value.strip()
        return cls(target=target, **values)

    @classmethod
    def from_file(cls, path, target: str = "Findings") -> "ReportSections":
        return cls.parse(Path(path).read_text(encoding="utf-8"), target)


def base_instruction(target: str = "Findings") -> str:
    return f"Provide a detailed description of the {target.lower()} in the radiology image."


def build_prompt(sections: ReportSections) -> tuple[str, str]:
    """Returns ``(system prompt, clinical prompt)``."""
    clinical = base_instruction(sections.target)
    present = sections.present()
    if present:
        lines = [clinical + " Following clinical context:"]
        lines += [f"{name}: {value}" for name, value in present]
        clinical = "\n".join(lines)
    return SYSTEM_PROMPT, clinical


def assemble(sections: ReportSections, image_token: str = IMAGE_PLACEHOLDER) -> str:
    """Full model input with the image features slotted between the two prompts."""
    system, clinical = build_prompt(sections)
    return "\n".join((system, image_token, clinical))
