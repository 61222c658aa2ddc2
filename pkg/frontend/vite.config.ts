import { defineConfig } from "vite";

export default defineConfig({
  build: {
    outDir: "dist",
    sourcemap: true,
  },
  server: {
    proxy: {
      // during development the review service runs separately
      "/api": "http://127.0.0.1:8000",
    },
  },
});
