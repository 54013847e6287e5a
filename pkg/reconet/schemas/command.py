# reconet/schemas/command.py
from pathlib import Path
from typing import Dict, Optional

from pydantic import BaseModel, Field


class CommandSpec(BaseModel):
    name: str
    flags: Dict[str, str] = Field(default_factory=dict)
    config_path: Optional[Path] = None
    out_dir: Path

    def manifest_values(self, resolved: Optional[Dict[str, str]] = None) -> Dict[str, str]:
        values = {"command": self.name, "out": str(self.out_dir)}
        if self.config_path is not None:
            values["config"] = str(self.config_path)
        for key, value in sorted(self.flags.items()):
            values[f"flag.{key}"] = value
        for key, value in (resolved or {}).items():
            values[f"resolved.{key}"] = value
        return values
