# unmtlab/commands/__init__.py
