from mecbench.cli import main

raise SystemExit(main())
