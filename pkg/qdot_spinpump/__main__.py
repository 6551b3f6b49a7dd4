"""
Permite ejecutar el módulo con: python -m qdot_spinpump
"""

from qdot_spinpump.cli import main

if __name__ == "__main__":
    main()
