"""CSV ingestion and export for networks and panels."""

from sil.data.io import read_edge_list, read_panel, write_edge_list, write_panel

__all__ = ["read_edge_list", "read_panel", "write_edge_list", "write_panel"]
